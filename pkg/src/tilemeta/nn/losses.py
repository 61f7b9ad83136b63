"""Loss functions with paired analytic gradients.

Each function returns (value, gradient-at-input).  Probabilities are
clamped to [1e-7, 1 - 1e-7] before any log, so losses stay finite on
saturated predictions; gradients are computed at the clamped values.
"""

from __future__ import annotations

import numpy as np

PROB_CLAMP = 1e-7


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Binary cross-entropy summed over features, averaged over rows.

    1-D inputs are treated as a single row, so the value is the plain
    per-feature sum.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    p2 = clamp_probs(np.atleast_2d(pred))
    t2 = np.atleast_2d(target)
    rows = p2.shape[0]
    loss = float(-(t2 * np.log(p2) + (1.0 - t2) * np.log1p(-p2)).sum() / rows)
    grad = ((-(t2 / p2) + (1.0 - t2) / (1.0 - p2)) / rows).reshape(pred.shape)
    return loss, grad


def mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    diff = pred - target
    loss = float((diff * diff).mean())
    grad = 2.0 * diff / diff.size
    return loss, grad


def policy_entropy(probs: np.ndarray) -> tuple[float, np.ndarray]:
    """Shannon entropy of one distribution, nats."""
    p = clamp_probs(np.asarray(probs, dtype=np.float64))
    value = float(-(p * np.log(p)).sum())
    grad = -(np.log(p) + 1.0)
    return value, grad


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def entropy_of_logits(logits: np.ndarray) -> tuple[float, np.ndarray]:
    """Entropy of softmax(logits) and its gradient at the logits."""
    p = softmax(logits)
    logp = np.log(clamp_probs(p))
    value = float(-(p * logp).sum())
    grad = -p * (logp + value)
    return value, grad
