"""Optimizers, learning-rate schedules, and gradient clipping.

Optimizers update parameter arrays in place from the gradient buffers
their layers accumulated.  The learning rate either stays constant or
decays linearly to zero over a declared total-update budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ParamTriple = tuple[str, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class Schedule:
    """Learning-rate profile over update steps."""

    kind: str = "constant"  # "constant" | "linear"
    total_updates: int = 0  # required for "linear"

    def factor(self, update_index: int) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "linear":
            if self.total_updates <= 0:
                raise ValueError("linear schedule needs a positive total_updates budget")
            return max(0.0, 1.0 - update_index / self.total_updates)
        raise ValueError(f"unknown schedule {self.kind!r}")


def clip_global_norm(params: list[ParamTriple], max_norm: float) -> float:
    """Scale all gradients down if their joint L2 norm exceeds max_norm."""
    total = 0.0
    for _, _, grad in params:
        total += float((grad * grad).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for _, _, grad in params:
            grad *= scale
    return norm


class SGD:
    def __init__(self, learning_rate: float, schedule: Schedule | None = None):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.learning_rate = learning_rate
        self.schedule = schedule or Schedule()
        self.updates_done = 0

    def effective_lr(self) -> float:
        return self.learning_rate * self.schedule.factor(self.updates_done)

    def step(self, params: list[ParamTriple]) -> None:
        lr = self.effective_lr()
        for _, param, grad in params:
            param -= lr * grad
        self.updates_done += 1


class RMSPropLike:
    """RMSProp with a running squared-gradient accumulator per parameter."""

    def __init__(
        self,
        learning_rate: float,
        decay: float = 0.99,
        epsilon: float = 1e-5,
        schedule: Schedule | None = None,
    ):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.schedule = schedule or Schedule()
        self.updates_done = 0
        self._accum: dict[int, np.ndarray] = {}

    def effective_lr(self) -> float:
        return self.learning_rate * self.schedule.factor(self.updates_done)

    def step(self, params: list[ParamTriple]) -> None:
        lr = self.effective_lr()
        for slot, (_, param, grad) in enumerate(params):
            acc = self._accum.get(slot)
            if acc is None or acc.shape != param.shape:
                acc = np.zeros_like(param)
                self._accum[slot] = acc
            acc *= self.decay
            acc += (1.0 - self.decay) * grad * grad
            param -= lr * grad / (np.sqrt(acc) + self.epsilon)
        self.updates_done += 1
