"""Central finite-difference checks for the losses and the full network."""

from __future__ import annotations

import numpy as np

from .losses import LOSS_KINDS, LossSpec
from .model import HeadConfig, ModelParams, backward, forward, init_model

H = 1e-6
# hidden pre-activations closer than this to the ReLU kink make the
# finite difference straddle a non-differentiable point; such draws are redrawn
KINK_MARGIN = 1e-4


def relative_error(analytic, numeric) -> float:
    """``||a - n|| / max(||a||, ||n||)`` with a floor against 0/0."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def numeric_gradient(f, x: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x`` (``x`` is perturbed in place and restored)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        up = f()
        x[i] = orig - h
        down = f()
        x[i] = orig
        grad[i] = (up - down) / (2 * h)
    return grad


def loss_gradient_error(kind: str, truth, pred, h: float = H, backend=None) -> float:
    spec = LossSpec(kind)
    pred = np.array(pred, dtype=np.float64)
    analytic = spec(truth, pred, backend=backend).gradient
    numeric = numeric_gradient(lambda: spec(truth, pred, backend=backend).value, pred, h)
    return relative_error(analytic, numeric)


def network_gradient_error(kind: str, params: ModelParams, x, truth, h: float = H) -> float:
    """Backprop vs. finite differences for every weight and bias (dropout off)."""
    spec = LossSpec(kind)
    out, cache = forward(params, x, mode="eval")
    grads = backward(params, cache, spec(truth, out).gradient)

    def value():
        return spec(truth, forward(params, x, mode="eval")[0]).value

    worst = 0.0
    for layer, (dw, db) in enumerate(grads):
        worst = max(worst, relative_error(dw, numeric_gradient(value, params.weights[layer], h)))
        worst = max(worst, relative_error(db, numeric_gradient(value, params.biases[layer], h)))
    return worst


def random_instance(rng: np.random.Generator, input_dim=3, hidden=(2,), k=4, batch=3):
    """A tiny network with random weights and biases, inputs and binary truth,
    redrawn until no hidden unit sits within ``KINK_MARGIN`` of zero."""
    while True:
        cfg = HeadConfig(hidden, k, 0.0, int(rng.integers(2**31)))
        params = init_model(cfg, input_dim)
        params.biases = [rng.normal(scale=0.5, size=b.shape) for b in params.biases]
        x = rng.normal(size=(batch, input_dim))
        truth = (rng.random((batch, k)) < 0.4).astype(np.float64)
        _, cache = forward(params, x, mode="eval")
        if all(np.abs(z).min() > KINK_MARGIN for z in cache.pre_activations[:-1]):
            return params, x, truth


def run_suite(seed: int, instances: int = 100, kinds=LOSS_KINDS) -> dict[str, float]:
    """Max network-gradient relative error per loss over random tiny networks."""
    rng = np.random.default_rng(seed)
    worst = {}
    for kind in kinds:
        errs = [network_gradient_error(kind, *random_instance(rng)) for _ in range(instances)]
        worst[kind] = max(errs)
    return worst
