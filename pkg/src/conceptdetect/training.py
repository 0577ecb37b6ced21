"""Training loop: NAdam, horizontal-flip augmentation, plateau LR reduction and
early stopping on validation F1."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .labels import Dataset, LabeledSample
from .losses import LossSpec
from .metrics import mean_f1, threshold_predictions
from .model import ModelParams, backward, forward

log = logging.getLogger(__name__)

# minimum change that counts as an improvement for plateau and early stopping
MIN_DELTA = 1e-6


@dataclass(frozen=True)
class PlateauPolicy:
    factor: float
    patience: int
    monitor: str = "f1"

    def __post_init__(self):
        if not 0.0 < self.factor < 1.0:
            raise ValueError(f"reduction factor must lie in (0, 1), got {self.factor}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.monitor not in ("f1", "loss"):
            raise ValueError(f"monitor must be 'f1' or 'loss', got {self.monitor!r}")

    @classmethod
    def parse(cls, text: str) -> Optional["PlateauPolicy"]:
        """Parse ``factor/patience/monitor`` such as ``0.2/5/f1``; ``none`` disables."""
        text = text.strip()
        if text.lower() in ("", "none", "nothing"):
            return None
        try:
            factor, patience, monitor = text.split("/")
            return cls(float(factor), int(patience), monitor.strip())
        except ValueError as exc:
            raise ValueError(f"bad lr reduction policy {text!r}: {exc}") from None

    def __str__(self) -> str:
        return f"{self.factor:g}/{self.patience}/{self.monitor}"


@dataclass(frozen=True)
class TrainingConfig:
    early_stopping_patience: int
    loss: LossSpec = field(default_factory=LossSpec)
    batch_size: int = 32
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    augmentation: str = "none"
    lr_reduction: Optional[PlateauPolicy] = None
    max_epochs: int = 100
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.early_stopping_patience < 1:
            raise ValueError("early_stopping_patience must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.augmentation not in ("none", "hflip"):
            raise ValueError(f"augmentation must be 'none' or 'hflip', got {self.augmentation!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float
    learning_rate: float


# -- data ---------------------------------------------------------------------

def augment_hflip(d: Dataset) -> Dataset:
    """Each sample followed by its left-right mirrored copy (id suffix ``-hflip``)."""
    out = []
    for s in d.samples:
        if not s.is_image:
            raise ValueError("augmentation requires images")
        out.append(s)
        out.append(LabeledSample(s.sample_id + "-hflip", s.features[:, ::-1].copy(), s.labels, s.category))
    return Dataset(d.vocabulary, tuple(out))


def split_validation(d: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle with ``seed`` and halve; the first ceil(n/2) go to val1.

    Each half keeps ascending sample_id order.
    """
    n = len(d)
    if n < 2:
        raise ValueError("need at least 2 samples to split")
    perm = np.random.default_rng(seed).permutation(n)
    cut = (n + 1) // 2
    halves = []
    for idx in (perm[:cut], perm[cut:]):
        halves.append(Dataset(d.vocabulary, tuple(d.samples[i] for i in sorted(idx))))
    return halves[0], halves[1]


# -- optimizer ----------------------------------------------------------------

@dataclass
class NAdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray]) -> "NAdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def nadam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: NAdamState, t: int,
               lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One NAdam update with fixed momentum. Returns ``(new_params, new_state)``.

    Inputs are left untouched.
    """
    if t < 1:
        raise ValueError("step index t starts at 1")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must have the same number of arrays")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for theta, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != theta.shape or m.shape != theta.shape:
            raise ValueError(f"shape mismatch: param {theta.shape}, grad {g.shape}, state {m.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        step = (beta1 * m_hat + (1.0 - beta1) * g / c1) / (np.sqrt(v_hat) + eps)
        new_p.append(theta - lr * step)
        new_m.append(m)
        new_v.append(v)
    return new_p, NAdamState(new_m, new_v)


# -- callbacks ----------------------------------------------------------------

def _improved(current: float, best: Optional[float], monitor: str) -> bool:
    if best is None:
        return True
    if monitor == "f1":
        return current > best + MIN_DELTA
    return current < best - MIN_DELTA


def count_plateau_reductions(values: Sequence[float], policy: PlateauPolicy) -> int:
    """Replay the plateau rule over a metric series and count reductions.

    After a reduction, stagnant epochs are not counted for ``patience`` epochs.
    """
    best = None
    wait = cooldown = n = 0
    for value in values:
        in_cooldown = cooldown > 0
        if in_cooldown:
            cooldown -= 1
            wait = 0
        if _improved(value, best, policy.monitor):
            best = value
            wait = 0
        elif not in_cooldown:
            wait += 1
            if wait >= policy.patience:
                n += 1
                cooldown = policy.patience
                wait = 0
    return n


def reduce_lr_on_plateau(history: Sequence[EpochRecord], policy: Optional[PlateauPolicy],
                         initial_lr: Optional[float] = None) -> float:
    """Learning rate to use after the last epoch in ``history``."""
    if initial_lr is None:
        if not history:
            raise ValueError("empty history and no initial learning rate")
        initial_lr = history[0].learning_rate
    if policy is None:
        return initial_lr
    attr = "val_f1" if policy.monitor == "f1" else "val_loss"
    n = count_plateau_reductions([getattr(r, attr) for r in history], policy)
    return initial_lr * policy.factor ** n


# -- loop ---------------------------------------------------------------------

def evaluate_model(params: ModelParams, d: Dataset, loss: LossSpec, threshold: float) -> tuple[float, float]:
    """``(loss value, mean F1)`` of the model on a dataset in eval mode."""
    out, _ = forward(params, d.feature_matrix(), mode="eval")
    y = d.label_matrix()
    return loss(y, out).value, mean_f1(list(y), list(threshold_predictions(out, threshold)))


def train(model: ModelParams, train_set: Dataset, val_set: Dataset, cfg: TrainingConfig,
          on_epoch: Optional[Callable[[EpochRecord], None]] = None):
    """Fit the head; returns ``(best params, history)``.

    The best params are those of the earliest epoch with the highest
    validation F1.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if train_set.vocabulary != val_set.vocabulary:
        raise ValueError("training and validation sets use different vocabularies")
    if len(train_set.vocabulary) != model.config.output_size:
        raise ValueError("model output size does not match the vocabulary")
    if cfg.augmentation == "hflip":
        train_set = augment_hflip(train_set)

    rng = np.random.default_rng(cfg.seed)
    x = train_set.feature_matrix()
    y = train_set.label_matrix().astype(np.float64)
    n = len(train_set)

    params = model.copy()
    best = model.copy()
    best_f1: Optional[float] = None
    since_best = 0
    state = NAdamState.zeros_like(params.arrays())
    lr = cfg.learning_rate
    step = 0
    history: list[EpochRecord] = []

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out, cache = forward(params, x[idx], mode="train", rng=rng)
            res = cfg.loss(y[idx], out)
            grads = backward(params, cache, res.gradient)
            step += 1
            flat_grads = [g for pair in grads for g in pair]
            new, state = nadam_step(params.arrays(), flat_grads, state, step, lr,
                                    cfg.beta1, cfg.beta2, cfg.eps_opt)
            params.weights, params.biases = new[0::2], new[1::2]
            params.version += 1
            total += res.value * len(idx)

        val_loss, val_f1 = evaluate_model(params, val_set, cfg.loss, cfg.threshold)
        rec = EpochRecord(epoch, total / n, val_loss, val_f1, lr)
        history.append(rec)
        log.info("epoch %d train_loss=%.6f val_loss=%.6f val_f1=%.6f lr=%g",
                 epoch, rec.train_loss, val_loss, val_f1, lr)
        if on_epoch is not None:
            on_epoch(rec)
        if not all(math.isfinite(v) for v in (rec.train_loss, val_loss, val_f1)):
            raise FloatingPointError(f"non-finite metrics at epoch {epoch}: {rec}")

        if _improved(val_f1, best_f1, "f1"):
            best_f1 = val_f1
            best = params.copy()
            since_best = 0
        else:
            since_best += 1
        if cfg.lr_reduction is not None:
            lr = reduce_lr_on_plateau(history, cfg.lr_reduction, cfg.learning_rate)
        if since_best >= cfg.early_stopping_patience:
            log.info("early stopping after epoch %d; best val_f1=%.6f", epoch, best_f1)
            break

    return best, history


HISTORY_HEADER = ("epoch", "train_loss", "val_loss", "val_f1", "lr")


def history_to_csv(history: Sequence[EpochRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_HEADER)
    for r in history:
        w.writerow([r.epoch] + ["%.17g" % v for v in (r.train_loss, r.val_loss, r.val_f1, r.learning_rate)])
    return buf.getvalue()


def read_history_csv(text: str) -> list[EpochRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != HISTORY_HEADER:
        raise ValueError("not a training history file")
    return [EpochRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4])) for r in rows[1:]]
