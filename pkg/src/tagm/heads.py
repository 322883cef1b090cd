"""Classifier heads and losses on top of the final hidden state.

Multiclass: softmax probabilities with negative log-likelihood.
Multilabel: independent per-class sigmoids with joint binary cross-entropy.
Both losses return the gradient w.r.t. the logits, which is where the
backward pass starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_vector, init_uniform, sigmoid, softmax_stable

__all__ = [
    "HeadParams",
    "softmax_head",
    "nll_loss",
    "sigmoid_head",
    "bce_loss",
    "head_backward",
    "PROB_FLOOR",
]

PROB_FLOOR = 1e-12  # clamp applied inside logs only


@dataclass
class HeadParams:
    w: np.ndarray  # (K, H)
    b: np.ndarray  # (K,)

    @property
    def classes(self) -> int:
        return self.w.shape[0]

    @property
    def hidden(self) -> int:
        return self.w.shape[1]

    @classmethod
    def init(cls, hidden: int, classes: int, rng: np.random.Generator) -> "HeadParams":
        return cls(w=init_uniform(rng, classes, hidden), b=np.zeros(classes))

    @classmethod
    def zeros(cls, hidden: int, classes: int) -> "HeadParams":
        return cls(w=np.zeros((classes, hidden)), b=np.zeros(classes))

    def tensors(self):
        return [("w", self.w), ("b", self.b)]

    def copy(self) -> "HeadParams":
        return HeadParams(self.w.copy(), self.b.copy())


def softmax_head(h: np.ndarray, p: HeadParams) -> np.ndarray:
    h = as_vector(h, p.hidden, "head input")
    return softmax_stable(p.w @ h + p.b)


def nll_loss(probs: np.ndarray, y: int) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of class y; gradient w.r.t. the logits.

    probs[y] is floored at PROB_FLOOR before the log so a saturated model
    yields a large finite loss instead of inf.
    """
    probs = as_vector(probs, name="probs")
    y = int(y)
    if not 0 <= y < probs.shape[0]:
        raise IndexError(f"label {y} out of range for {probs.shape[0]} classes")
    loss = -np.log(max(probs[y], PROB_FLOOR))
    grad_logits = probs.copy()
    grad_logits[y] -= 1.0
    return float(loss), grad_logits


def sigmoid_head(h: np.ndarray, p: HeadParams) -> np.ndarray:
    h = as_vector(h, p.hidden, "head input")
    return sigmoid(p.w @ h + p.b)


def bce_loss(probs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Joint binary cross-entropy over all classes; gradient w.r.t. logits."""
    probs = as_vector(probs, name="probs")
    targets = as_vector(targets, probs.shape[0], "targets")
    if np.any((targets != 0.0) & (targets != 1.0)):
        raise ValueError("multilabel targets must be 0/1")
    clamped = np.clip(probs, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = -(targets * np.log(clamped) + (1.0 - targets) * np.log(1.0 - clamped)).sum()
    return float(loss), probs - targets


def head_backward(h: np.ndarray, p: HeadParams, grad_logits: np.ndarray) -> tuple[HeadParams, np.ndarray]:
    """Parameter gradients and the gradient flowing back into h."""
    h = as_vector(h, p.hidden, "head input")
    grad_logits = as_vector(grad_logits, p.classes, "grad_logits")
    g = HeadParams(w=np.outer(grad_logits, h), b=grad_logits.copy())
    return g, p.w.T @ grad_logits
