"""Vectorized numpy loss kernels; fallback for the compiled ``_kernels`` module.

Both modules expose the same three functions with identical semantics. Inputs
are float64 arrays of shape (batch, k); gradients are taken with respect to the
predicted probabilities.
"""

import numpy as np


def soft_f1_components(y, p, eps):
    """Row-wise soft tp/fp/fn, precision, recall and F1 (NaN F1 -> 0)."""
    tp = np.sum(y * p, axis=-1)
    fp = np.sum((1.0 - y) * p, axis=-1)
    fn = np.sum(y * (1.0 - p), axis=-1)
    prec = tp / (tp + fp + eps)
    rec = tp / (tp + fn + eps)
    f1 = 2.0 * prec * rec / (prec + rec + eps)
    f1 = np.where(np.isnan(f1), 0.0, f1)
    return tp, fp, fn, prec, rec, f1


def soft_f1_loss(y, p, eps):
    """``1 - mean(sF1)`` and its gradient."""
    tp, fp, fn, prec, rec, f1 = soft_f1_components(y, p, eps)
    batch = y.shape[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        p_den = tp + fp + eps
        r_den = tp + fn + eps
        f_den = prec + rec + eps
        df_dprec = 2.0 * rec * (rec + eps) / (f_den * f_den)
        df_drec = 2.0 * prec * (prec + eps) / (f_den * f_den)
        # d(tp+fn)/dp vanishes, so recall depends on p only through tp
        dprec = (y * p_den[:, None] - tp[:, None]) / (p_den * p_den)[:, None]
        drec = y / r_den[:, None]
        grad = -(df_dprec[:, None] * dprec + df_drec[:, None] * drec) / batch
        guarded = np.isnan(2.0 * prec * rec / f_den)
    grad[guarded] = 0.0
    return float(1.0 - np.mean(f1)), grad


def bce_loss(y, p, eps):
    """Mean binary cross-entropy over all elements with ``p`` clamped to [eps, 1-eps]."""
    q = np.clip(p, eps, 1.0 - eps)
    n = y.size
    value = -np.mean(y * np.log(q) + (1.0 - y) * np.log(1.0 - q))
    grad = (-(y / q) + (1.0 - y) / (1.0 - q)) / n
    grad[(p < eps) | (p > 1.0 - eps)] = 0.0
    return float(value), grad
