"""Binary cross-entropy, soft-F1 and the two combined losses.

Every loss returns a :class:`LossOutput` holding the scalar value and the
gradient with respect to the predicted probabilities (not the logits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels

EPSILON = 1e-7

LOSS_KINDS = ("bce", "one_minus_soft_f1", "product", "sum")


@dataclass(frozen=True)
class LossOutput:
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class LossSpec:
    kind: str = "bce"
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def __call__(self, truth, pred, backend=None) -> LossOutput:
        return LOSSES[self.kind](truth, pred, self.epsilon, backend=backend)


def _prepare(truth, pred):
    y = np.ascontiguousarray(truth, dtype=np.float64)
    p = np.ascontiguousarray(pred, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if p.ndim == 1:
        p = p[None, :]
    if y.shape != p.shape or y.ndim != 2:
        raise ValueError(f"shape mismatch: truth {np.shape(truth)} vs pred {np.shape(pred)}")
    return y, p


def bce(truth, pred, eps: float = EPSILON, backend=None) -> LossOutput:
    y, p = _prepare(truth, pred)
    value, grad = get_kernels(backend).bce_loss(y, p, eps)
    return LossOutput(float(value), grad.reshape(np.shape(pred)))


def soft_f1_components(truth, pred, eps: float = EPSILON, backend=None):
    """Per-sample ``(tp, fp, fn, precision, recall, sF1)`` arrays."""
    y, p = _prepare(truth, pred)
    return get_kernels(backend).soft_f1_components(y, p, eps)


def one_minus_soft_f1(truth, pred, eps: float = EPSILON, backend=None) -> LossOutput:
    y, p = _prepare(truth, pred)
    value, grad = get_kernels(backend).soft_f1_loss(y, p, eps)
    return LossOutput(float(value), grad.reshape(np.shape(pred)))


def product_loss(truth, pred, eps: float = EPSILON, backend=None) -> LossOutput:
    # scalar (1 - mean sF1) times scalar mean bce
    f = one_minus_soft_f1(truth, pred, eps, backend)
    b = bce(truth, pred, eps, backend)
    return LossOutput(f.value * b.value, f.value * b.gradient + b.value * f.gradient)


def sum_loss(truth, pred, eps: float = EPSILON, backend=None) -> LossOutput:
    f = one_minus_soft_f1(truth, pred, eps, backend)
    b = bce(truth, pred, eps, backend)
    return LossOutput(f.value + b.value, f.gradient + b.gradient)


LOSSES = {
    "bce": bce,
    "one_minus_soft_f1": one_minus_soft_f1,
    "product": product_loss,
    "sum": sum_loss,
}
