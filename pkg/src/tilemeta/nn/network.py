"""Sequential network container and model-file serialization.

A Network chains layers, threading recurrent state through any LSTM
cells and flattening spatial outputs before a dense layer.  The model
file format is JSON: a format-version field plus per-layer specs with
base64-encoded float64 parameter arrays, shared by conditional models
and (via the layer-level helpers) the agents.
"""

from __future__ import annotations

import base64
import json
from typing import IO, Sequence

import numpy as np

from .layers import Conv2D, Dense, LSTMCell

FORMAT_VERSION = 1

Layer = Dense | Conv2D | LSTMCell

_LAYER_CLASSES = {"dense": Dense, "conv2d": Conv2D, "lstm": LSTMCell}


def build_layer(spec: dict, rng: np.random.Generator | None = None) -> Layer:
    kwargs = {k: v for k, v in spec.items() if k != "variant"}
    return _LAYER_CLASSES[spec["variant"]](**kwargs, rng=rng)


class Network:
    """An ordered stack of layers applied in sequence."""

    def __init__(self, layers: Sequence[Layer], init_seed: int = 0):
        self.layers = list(layers)
        self.init_seed = init_seed

    @classmethod
    def from_specs(cls, specs: Sequence[dict], init_seed: int = 0) -> "Network":
        rng = np.random.default_rng(init_seed)
        return cls([build_layer(spec, rng) for spec in specs], init_seed=init_seed)

    def forward(self, x: np.ndarray, state: list | None = None) -> tuple[np.ndarray, list, list]:
        """Returns (output, new recurrent state, caches).

        ``state`` holds one (h, c) pair per LSTM layer, in layer order;
        None means zero initial state everywhere.
        """
        caches: list = []
        new_state: list = []
        lstm_index = 0
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            if isinstance(layer, LSTMCell):
                prev = state[lstm_index] if state is not None else None
                out, pair, cache = layer.forward(out.ravel() if out.ndim > 1 else out, prev)
                new_state.append(pair)
                lstm_index += 1
            else:
                if isinstance(layer, Dense) and out.ndim > 2:
                    out = out.ravel()  # spatial output flattened for the dense head
                out, cache = layer.forward(out)
            caches.append(cache)
        return out, new_state, caches

    def backward(self, caches: list, dout: np.ndarray) -> np.ndarray:
        """Single-pass backward; recurrent state gradients are dropped.

        Sufficient for feedforward stacks (the conditional model); the
        agents manage LSTM chains across time steps themselves.
        """
        grad = dout
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            if isinstance(layer, LSTMCell):
                grad, _, _ = layer.backward(cache, grad)
            else:
                if isinstance(layer, Conv2D):
                    # Undo any flattening a later layer required.
                    grad = np.asarray(grad).reshape(cache["y"].shape)
                grad = layer.backward(cache, grad)
        return grad

    def parameters(self) -> list[tuple[str, np.ndarray, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, param, grad in layer.parameters():
                out.append((f"layer{i}.{name}", param, grad))
        return out

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "init_seed": self.init_seed,
            "layers": [layer_to_dict(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        if data.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {data.get('format_version')!r}")
        layers = [layer_from_dict(entry) for entry in data["layers"]]
        return cls(layers, init_seed=data.get("init_seed", 0))

    def save(self, fp: IO[str]) -> None:
        json.dump(self.to_dict(), fp)

    @classmethod
    def load(cls, fp: IO[str]) -> "Network":
        return cls.from_dict(json.load(fp))


def encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()


def layer_to_dict(layer: Layer) -> dict:
    entry = dict(layer.spec())
    entry["params"] = {name: encode_array(param) for name, param, _ in layer.parameters()}
    return entry


def layer_from_dict(entry: dict) -> Layer:
    spec = {k: v for k, v in entry.items() if k != "params"}
    layer = build_layer(spec)
    for name, param, _ in layer.parameters():
        param[:] = decode_array(entry["params"][name])
    return layer
