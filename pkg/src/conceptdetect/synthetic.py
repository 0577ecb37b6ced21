"""Synthetic sparse multi-label data that a linear head can separate exactly."""

from __future__ import annotations

import numpy as np

from .labels import Dataset, LabeledSample, LabelVocabulary


def make_separable(n_samples: int = 500, n_features: int = 32, n_labels: int = 16, mean_labels: float = 3.0,
                   margin: float = 0.5, seed: int = 0, image_shape=None) -> Dataset:
    """Random sparse label sets embedded along orthonormal label directions.

    Label ``j`` is drawn with probability ``mean_labels / n_labels`` (empty
    sets are redrawn). Along direction ``u_j`` the sample sits at ``+1`` if it
    carries the label and ``-1`` otherwise, plus jitter bounded by
    ``1 - margin``; the remaining directions hold Gaussian noise. Hence
    ``sign(u_j . x)`` recovers every label with a gap of at least ``margin``.
    """
    if n_labels > n_features:
        raise ValueError("need at least as many features as labels")
    if not 0.0 < margin <= 1.0:
        raise ValueError("margin must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(n_features, n_features)))
    rate = mean_labels / n_labels

    y = np.zeros((0, n_labels), dtype=np.uint8)
    while len(y) < n_samples:
        draw = (rng.random((n_samples, n_labels)) < rate).astype(np.uint8)
        y = np.concatenate([y, draw[draw.any(axis=1)]])
    y = y[:n_samples]

    jitter = rng.uniform(-(1.0 - margin), 1.0 - margin, size=(n_samples, n_labels))
    coords = np.concatenate([(2.0 * y - 1.0) + jitter,
                             rng.normal(size=(n_samples, n_features - n_labels))], axis=1)
    x = coords @ basis.T

    vocab = LabelVocabulary([f"C{j:07d}" for j in range(n_labels)])
    samples = []
    for i in range(n_samples):
        feats = x[i] if image_shape is None else x[i].reshape(image_shape)
        samples.append(LabeledSample(f"s{i:05d}", feats, y[i]))
    return Dataset(vocab, tuple(samples))
