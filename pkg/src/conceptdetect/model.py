"""Fully-connected classification head with dropout and k sigmoid outputs.

Layers are ``dense -> ReLU -> dropout`` for every hidden width, followed by a
dense prediction layer with an elementwise sigmoid. Dropout never follows the
prediction layer.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .labels import LabelVocabulary
from .metrics import threshold_predictions


@dataclass(frozen=True)
class HeadConfig:
    hidden_sizes: tuple[int, ...]
    output_size: int
    dropout_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes) or self.output_size < 1:
            raise ValueError(f"layer widths must be >= 1, got {self.hidden_sizes} -> {self.output_size}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")


@dataclass
class ModelParams:
    config: HeadConfig
    input_dim: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    # bumped on every in-place update so stale forward caches are detected
    version: int = 0

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Parameters in manifest order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, self.input_dim, [w.copy() for w in self.weights],
                           [b.copy() for b in self.biases], self.version)

    def equals(self, other: "ModelParams") -> bool:
        return (self.config == other.config and self.input_dim == other.input_dim
                and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())))


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    masks: list[Optional[np.ndarray]]
    outputs: np.ndarray
    version: int
    shapes: list[tuple[int, ...]] = field(default_factory=list)


def layer_sizes(cfg: HeadConfig, input_dim: int) -> list[int]:
    return [input_dim, *cfg.hidden_sizes, cfg.output_size]


def init_model(cfg: HeadConfig, input_dim: int) -> ModelParams:
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    sizes = layer_sizes(cfg, input_dim)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(cfg, input_dim, weights, biases)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def as_batch(features) -> np.ndarray:
    """Stack per-sample features (vectors or images) into a (batch, dim) matrix."""
    if isinstance(features, np.ndarray) and features.ndim == 2 and features.dtype == np.float64:
        return features
    if isinstance(features, np.ndarray) and features.ndim == 2:
        return features.astype(np.float64)
    return np.stack([np.asarray(f, dtype=np.float64).ravel() for f in features])


def forward(params: ModelParams, features, mode: str = "eval", rng: Optional[np.random.Generator] = None,
            masks: Optional[Sequence[np.ndarray]] = None):
    """Run the head on a batch. Returns ``(predictions, cache)``.

    In ``"train"`` mode each hidden unit is dropped with probability
    ``dropout_p`` and survivors are scaled by ``1/(1-p)``. Masks are drawn
    from ``rng`` unless given explicitly through ``masks``.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = as_batch(features)
    if x.shape[1] != params.input_dim:
        raise ValueError(f"feature dim {x.shape[1]} does not match model input dim {params.input_dim}")
    p = params.config.dropout_p
    drop = mode == "train" and (p > 0 or masks is not None)
    if drop and masks is None and rng is None:
        raise ValueError("train mode with dropout needs a random generator")

    pre, acts, used_masks = [], [x], []
    a = x
    n_hidden = params.n_layers - 1
    for layer in range(n_hidden):
        z = a @ params.weights[layer] + params.biases[layer]
        a = np.maximum(z, 0.0)
        mask = None
        if drop:
            if masks is not None:
                mask = np.asarray(masks[layer], dtype=np.float64)
            else:
                mask = (rng.random(a.shape) >= p) / (1.0 - p)
            a = a * mask
        pre.append(z)
        acts.append(a)
        used_masks.append(mask)
    z = a @ params.weights[-1] + params.biases[-1]
    out = sigmoid(z)
    pre.append(z)
    cache = ForwardCache(x, pre, acts, used_masks, out, params.version,
                         [w.shape for w in params.weights])
    return out, cache


def backward(params: ModelParams, cache: ForwardCache, grad_out) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backpropagate ``dL/dpredictions``; returns ``[(dW, db), ...]`` per layer."""
    if cache.version != params.version or cache.shapes != [w.shape for w in params.weights]:
        raise ValueError("forward cache does not belong to the current parameters")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != cache.outputs.shape:
        raise ValueError(f"gradient shape {g.shape} != prediction shape {cache.outputs.shape}")
    s = cache.outputs
    dz = g * s * (1.0 - s)
    grads = [None] * params.n_layers
    for layer in reversed(range(params.n_layers)):
        a_in = cache.activations[layer]
        grads[layer] = (a_in.T @ dz, dz.sum(axis=0))
        if layer == 0:
            break
        da = dz @ params.weights[layer].T
        mask = cache.masks[layer - 1]
        if mask is not None:
            da = da * mask
        dz = da * (cache.pre_activations[layer - 1] > 0)
    return grads


def predict_scores(params: ModelParams, features) -> np.ndarray:
    out, _ = forward(params, features, mode="eval")
    return out


def predict(params: ModelParams, features, threshold: float = 0.5) -> np.ndarray:
    return threshold_predictions(predict_scores(params, features), threshold)


# Checkpoint container:
#   8 bytes   magic b"CDHEAD01"
#   8 bytes   header length n, unsigned little-endian
#   n bytes   UTF-8 JSON header (config, vocabulary, layer manifest)
#   rest      parameter data, little-endian float64, C order, at manifest offsets
MAGIC = b"CDHEAD01"
FORMAT_VERSION = 1


def save_checkpoint(path, params: ModelParams, vocab: LabelVocabulary, input_shape=None,
                    extra: Optional[dict] = None) -> None:
    if len(vocab) != params.config.output_size:
        raise ValueError("vocabulary size does not match model output size")
    manifest, offset, blobs = [], 0, []
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        for kind, arr in (("weight", w), ("bias", b)):
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            manifest.append({"name": f"dense_{i}/{kind}", "shape": list(arr.shape),
                             "offset": offset, "nbytes": len(data)})
            offset += len(data)
            blobs.append(data)
    header = {
        "format": "conceptdetect-checkpoint",
        "format_version": FORMAT_VERSION,
        "dtype": "<f8",
        "head": asdict(params.config),
        "input_dim": params.input_dim,
        "input_shape": list(input_shape) if input_shape is not None else [params.input_dim],
        "vocabulary": list(vocab.concepts),
        "vocabulary_sha256": vocab.sha256(),
        "layers": manifest,
        "extra": extra or {},
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Returns ``(params, vocabulary, header)``."""
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16:16 + n].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('format_version')}")
    vocab = LabelVocabulary(header["vocabulary"])
    if vocab.sha256() != header["vocabulary_sha256"]:
        raise ValueError(f"{path}: vocabulary hash mismatch")
    data = blob[16 + n:]
    arrays = []
    for entry in header["layers"]:
        start = entry["offset"]
        arr = np.frombuffer(data[start:start + entry["nbytes"]], dtype="<f8")
        arrays.append(arr.reshape(entry["shape"]).astype(np.float64))
    head = header["head"]
    cfg = HeadConfig(tuple(head["hidden_sizes"]), head["output_size"], head["dropout_p"], head["seed"])
    params = ModelParams(cfg, header["input_dim"], arrays[0::2], arrays[1::2])
    if [w.shape for w in params.weights] != list(zip(layer_sizes(cfg, params.input_dim)[:-1],
                                                     layer_sizes(cfg, params.input_dim)[1:])):
        raise ValueError(f"{path}: layer manifest does not match head config")
    return params, vocab, header
