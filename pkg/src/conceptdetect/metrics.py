"""Thresholding and the sample-averaged F1 score used by the challenge."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SampleScore:
    precision: float
    recall: float
    f1: float


def threshold_predictions(scores, threshold: float = 0.5) -> np.ndarray:
    """Binarize sigmoid outputs; the boundary is inclusive (``score >= threshold``).

    Works on a single vector or a batch.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    scores = np.asarray(scores, dtype=np.float64)
    return (scores >= threshold).astype(np.uint8)


def sample_f1(truth, pred) -> SampleScore:
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ValueError(f"shape mismatch: truth {truth.shape} vs pred {pred.shape}")
    t = truth.astype(bool)
    p = pred.astype(bool)
    tp = int(np.count_nonzero(t & p))
    n_pred = int(np.count_nonzero(p))
    n_true = int(np.count_nonzero(t))
    if n_true == 0 and n_pred == 0:
        return SampleScore(1.0, 1.0, 1.0)
    precision = Fraction(tp, n_pred) if n_pred else Fraction(0)
    recall = Fraction(tp, n_true) if n_true else Fraction(0)
    if tp == 0:
        return SampleScore(float(precision), float(recall), 0.0)
    # 2pr/(p+r) reduces to 2tp/(|T|+|P|) over integers
    f1 = Fraction(2 * tp, n_true + n_pred)
    return SampleScore(float(precision), float(recall), float(f1))


def mean_f1(truths: Sequence, preds: Sequence) -> float:
    """Arithmetic mean of per-sample F1.

    ``math.fsum`` gives a correctly rounded total, so the result does not
    depend on the order of the pairs.
    """
    if len(truths) == 0 or len(truths) != len(preds):
        raise ValueError(f"need equal-length non-empty lists, got {len(truths)} and {len(preds)}")
    return math.fsum(sample_f1(t, p).f1 for t, p in zip(truths, preds)) / len(truths)
