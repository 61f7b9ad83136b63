"""Dense, 2-D convolution, and LSTM layers with handwritten gradients.

Every layer owns its parameter arrays and matching gradient buffers.
``forward`` returns the output plus an opaque cache; ``backward`` takes
that cache and the loss gradient at the output, accumulates parameter
gradients into the buffers (so repeated application of one cell across
time steps sums naturally), and returns the gradient at the input.
Gradient correctness is pinned by finite-difference tests rather than
an autodiff framework; that exactness is the point of the module.

Parameters initialize from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
All math is float64.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("identity", "sigmoid", "tanh", "relu")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(activation)/dz, using pre-activation z or output y as convenient."""
    if name == "identity":
        return np.ones_like(z)
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "tanh":
        return 1.0 - y * y
    if name == "relu":
        return (z > 0).astype(z.dtype)
    raise ValueError(f"unknown activation {name!r}")


def _uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """y = activation(x @ W + b); accepts (in,) or (batch, in) inputs."""

    variant = "dense"

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity", rng: np.random.Generator | None = None):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("dimensions must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        self.W = _uniform_init(rng, in_dim, (in_dim, out_dim))
        self.b = _uniform_init(rng, in_dim, (out_dim,))
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        x2 = x[None, :] if squeeze else x
        if x2.shape[1] != self.in_dim:
            raise ValueError(f"expected input dim {self.in_dim}, got {x2.shape[1]}")
        z = x2 @ self.W + self.b
        y = _apply_activation(self.activation, z)
        cache = {"x": x2, "z": z, "y": y, "squeeze": squeeze}
        return (y[0] if squeeze else y), cache

    def backward(self, cache: dict, dy: np.ndarray) -> np.ndarray:
        dy2 = np.asarray(dy, dtype=np.float64)
        if cache["squeeze"]:
            dy2 = dy2[None, :]
        dz = dy2 * _activation_grad(self.activation, cache["z"], cache["y"])
        self.gW += cache["x"].T @ dz
        self.gb += dz.sum(axis=0)
        dx = dz @ self.W.T
        return dx[0] if cache["squeeze"] else dx

    def parameters(self) -> list[tuple[str, np.ndarray, np.ndarray]]:
        return [("W", self.W, self.gW), ("b", self.b, self.gb)]

    def zero_grad(self) -> None:
        self.gW[:] = 0.0
        self.gb[:] = 0.0

    def spec(self) -> dict:
        return {
            "variant": self.variant,
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "activation": self.activation,
        }


class Conv2D:
    """Valid-padding 2-D convolution over a single (channels, H, W) input."""

    variant = "conv2d"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        activation: str = "identity",
        rng: np.random.Generator | None = None,
    ):
        if min(in_channels, out_channels, kernel, stride) < 1:
            raise ValueError("dimensions must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel * kernel
        self.W = _uniform_init(rng, fan_in, (out_channels, in_channels, kernel, kernel))
        self.b = _uniform_init(rng, fan_in, (out_channels,))
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)

    def _out_size(self, size: int) -> int:
        span = size - self.kernel
        if span < 0:
            raise ValueError("input smaller than kernel")
        return span // self.stride + 1

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[0] != self.in_channels:
            raise ValueError(f"expected ({self.in_channels}, H, W) input, got {x.shape}")
        k, s = self.kernel, self.stride
        oh, ow = self._out_size(x.shape[1]), self._out_size(x.shape[2])
        cols = np.empty((self.in_channels, k, k, oh, ow))
        for a in range(k):
            for b in range(k):
                cols[:, a, b] = x[:, a : a + oh * s : s, b : b + ow * s : s]
        z = np.tensordot(self.W, cols, axes=([1, 2, 3], [0, 1, 2])) + self.b[:, None, None]
        y = _apply_activation(self.activation, z)
        return y, {"x_shape": x.shape, "cols": cols, "z": z, "y": y}

    def backward(self, cache: dict, dy: np.ndarray) -> np.ndarray:
        dz = np.asarray(dy, dtype=np.float64) * _activation_grad(self.activation, cache["z"], cache["y"])
        self.gW += np.tensordot(dz, cache["cols"], axes=([1, 2], [3, 4]))
        self.gb += dz.sum(axis=(1, 2))
        k, s = self.kernel, self.stride
        _, oh, ow = dz.shape
        dx = np.zeros(cache["x_shape"])
        # Scatter each kernel offset's contribution back onto the input.
        for a in range(k):
            for b in range(k):
                dx[:, a : a + oh * s : s, b : b + ow * s : s] += np.tensordot(
                    self.W[:, :, a, b], dz, axes=([0], [0])
                )
        return dx

    def parameters(self) -> list[tuple[str, np.ndarray, np.ndarray]]:
        return [("W", self.W, self.gW), ("b", self.b, self.gb)]

    def zero_grad(self) -> None:
        self.gW[:] = 0.0
        self.gb[:] = 0.0

    def spec(self) -> dict:
        return {
            "variant": self.variant,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "activation": self.activation,
        }


class LSTMCell:
    """One LSTM step; apply repeatedly for sequences, then backward in reverse.

    Gate order in the packed weight matrices is input, forget, cell
    candidate, output.  Backward takes the incoming hidden/cell-state
    gradients and returns gradients for the input and the previous
    hidden/cell states, so chains propagate by feeding each step's
    returned state gradients into the step before it.
    """

    variant = "lstm"

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator | None = None):
        if input_size < 1 or hidden_size < 1:
            raise ValueError("dimensions must be positive")
        self.input_size = input_size
        self.hidden_size = hidden_size
        rng = rng or np.random.default_rng(0)
        fan_in = input_size + hidden_size
        self.W_x = _uniform_init(rng, fan_in, (input_size, 4 * hidden_size))
        self.W_h = _uniform_init(rng, fan_in, (hidden_size, 4 * hidden_size))
        self.b = _uniform_init(rng, fan_in, (4 * hidden_size,))
        self.gW_x = np.zeros_like(self.W_x)
        self.gW_h = np.zeros_like(self.W_h)
        self.gb = np.zeros_like(self.b)

    def zero_state(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.hidden_size), np.zeros(self.hidden_size)

    def forward(
        self, x: np.ndarray, state: tuple[np.ndarray, np.ndarray] | None = None
    ) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray], dict]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_size,):
            raise ValueError(f"expected input shape ({self.input_size},), got {x.shape}")
        h_prev, c_prev = state if state is not None else self.zero_state()
        z = x @ self.W_x + h_prev @ self.W_h + self.b
        H = self.hidden_size
        i = 1.0 / (1.0 + np.exp(-z[:H]))
        f = 1.0 / (1.0 + np.exp(-z[H : 2 * H]))
        g = np.tanh(z[2 * H : 3 * H])
        o = 1.0 / (1.0 + np.exp(-z[3 * H :]))
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev, "i": i, "f": f, "g": g, "o": o, "tc": tc}
        return h, (h, c), cache

    def backward(
        self, cache: dict, dh: np.ndarray, dc: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        i, f, g, o, tc = cache["i"], cache["f"], cache["g"], cache["o"], cache["tc"]
        dh = np.asarray(dh, dtype=np.float64)
        dc_total = (dc if dc is not None else 0.0) + dh * o * (1.0 - tc * tc)
        do = dh * tc
        di = dc_total * g
        df = dc_total * cache["c_prev"]
        dg = dc_total * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ]
        )
        self.gW_x += np.outer(cache["x"], dz)
        self.gW_h += np.outer(cache["h_prev"], dz)
        self.gb += dz
        dx = dz @ self.W_x.T
        dh_prev = dz @ self.W_h.T
        dc_prev = dc_total * f
        return dx, dh_prev, dc_prev

    def parameters(self) -> list[tuple[str, np.ndarray, np.ndarray]]:
        return [("W_x", self.W_x, self.gW_x), ("W_h", self.W_h, self.gW_h), ("b", self.b, self.gb)]

    def zero_grad(self) -> None:
        self.gW_x[:] = 0.0
        self.gW_h[:] = 0.0
        self.gb[:] = 0.0

    def spec(self) -> dict:
        return {"variant": self.variant, "input_size": self.input_size, "hidden_size": self.hidden_size}
