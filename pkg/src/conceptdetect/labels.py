"""Concept vocabulary, multi one-hot encoding and dataset label statistics."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

CATEGORIES = ("DRAN", "DRCO", "DRCT", "DRMR", "DRPE", "DRUS", "DRXR")

_RESERVED = (";", "\t")


def check_concept_id(cid: str) -> str:
    if not isinstance(cid, str) or not cid:
        raise ValueError(f"concept id must be a non-empty string, got {cid!r}")
    if any(ch.isspace() for ch in cid) or any(ch in cid for ch in _RESERVED):
        raise ValueError(f"concept id {cid!r} contains whitespace or a reserved delimiter")
    return cid


class LabelVocabulary:
    """Sorted unique concept ids with a bidirectional id <-> position map.

    Ordering is ascending by UTF-8 bytes, which for ``str`` coincides with
    code point order, so plain ``sorted`` is used.
    """

    __slots__ = ("_concepts", "_index")

    def __init__(self, concepts: Iterable[str]):
        concepts = tuple(concepts)
        if not concepts:
            raise ValueError("no concepts")
        for cid in concepts:
            check_concept_id(cid)
        for a, b in zip(concepts, concepts[1:]):
            if not a.encode("utf-8") < b.encode("utf-8"):
                raise ValueError(f"concepts must be strictly ascending: {a!r} !< {b!r}")
        self._concepts = concepts
        self._index = {cid: i for i, cid in enumerate(concepts)}

    @property
    def concepts(self) -> tuple[str, ...]:
        return self._concepts

    def __len__(self) -> int:
        return len(self._concepts)

    def __iter__(self):
        return iter(self._concepts)

    def __contains__(self, cid) -> bool:
        return cid in self._index

    def __getitem__(self, i: int) -> str:
        return self._concepts[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelVocabulary) and self._concepts == other._concepts

    def __hash__(self) -> int:
        return hash(self._concepts)

    def __repr__(self) -> str:
        return f"LabelVocabulary(k={len(self)})"

    def index(self, cid: str) -> int:
        try:
            return self._index[cid]
        except KeyError:
            raise KeyError(f"unknown concept {cid!r}") from None

    def sha256(self) -> str:
        """Digest of the newline-joined concept list; identifies a label space."""
        return hashlib.sha256("\n".join(self._concepts).encode("utf-8")).hexdigest()


def build_vocabulary(label_sets: Iterable[Iterable[str]]) -> LabelVocabulary:
    union: set[str] = set()
    for labels in label_sets:
        union.update(labels)
    if not union:
        raise ValueError("no concepts")
    return LabelVocabulary(sorted(union, key=lambda c: c.encode("utf-8")))


def encode(labels: Iterable[str], vocab: LabelVocabulary) -> np.ndarray:
    vec = np.zeros(len(vocab), dtype=np.uint8)
    for cid in labels:
        if cid not in vocab:
            raise KeyError(f"unknown concept {cid!r}")
        vec[vocab.index(cid)] = 1
    return vec


def decode(vec, vocab: LabelVocabulary) -> frozenset[str]:
    vec = np.asarray(vec)
    if vec.ndim != 1 or vec.shape[0] != len(vocab):
        raise ValueError(f"vector length {vec.shape} does not match vocabulary size {len(vocab)}")
    if not np.isin(vec, (0, 1)).all():
        raise ValueError("multi-hot vector must contain only 0 and 1")
    return frozenset(vocab[i] for i in np.flatnonzero(vec))


@dataclass(frozen=True)
class LabeledSample:
    sample_id: str
    features: Optional[np.ndarray]
    labels: np.ndarray
    category: Optional[str] = None

    def __post_init__(self):
        if self.category is not None and self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}; expected one of {CATEGORIES}")

    @property
    def is_image(self) -> bool:
        return self.features is not None and self.features.ndim == 2


@dataclass(frozen=True)
class Dataset:
    vocabulary: LabelVocabulary
    samples: tuple[LabeledSample, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        k = len(self.vocabulary)
        seen = set()
        shape = None
        for s in self.samples:
            if s.labels.shape != (k,):
                raise ValueError(f"sample {s.sample_id!r}: labels length {s.labels.shape} != k={k}")
            if s.sample_id in seen:
                raise ValueError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)
            fshape = None if s.features is None else s.features.shape
            if shape is None:
                shape = fshape
            elif fshape != shape:
                raise ValueError(f"sample {s.sample_id!r}: feature shape {fshape} differs from {shape}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_ids(self) -> list[str]:
        return [s.sample_id for s in self.samples]

    def label_matrix(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, len(self.vocabulary)), dtype=np.uint8)
        return np.stack([s.labels for s in self.samples])

    def feature_matrix(self) -> np.ndarray:
        """Features flattened to one row per sample, as float64."""
        if any(s.features is None for s in self.samples):
            raise ValueError("dataset has label-only samples")
        return np.stack([np.asarray(s.features, dtype=np.float64).ravel() for s in self.samples])

    def label_sets(self) -> list[frozenset[str]]:
        return [decode(s.labels, self.vocabulary) for s in self.samples]

    def subset(self, ids: Sequence[str]) -> "Dataset":
        by_id = {s.sample_id: s for s in self.samples}
        return Dataset(self.vocabulary, tuple(by_id[i] for i in ids))

    @classmethod
    def from_label_sets(cls, label_sets: dict[str, Iterable[str]], vocab: Optional[LabelVocabulary] = None,
                        features: Optional[dict[str, np.ndarray]] = None) -> "Dataset":
        """Build a dataset from ``{sample_id: concepts}``, ordered by sample_id."""
        label_sets = {sid: frozenset(v) for sid, v in label_sets.items()}
        if vocab is None:
            vocab = build_vocabulary(label_sets.values())
        samples = []
        for sid in sorted(label_sets, key=lambda s: s.encode("utf-8")):
            feats = None if features is None else features[sid]
            samples.append(LabeledSample(sid, feats, encode(label_sets[sid], vocab)))
        return cls(vocab, tuple(samples))


def _label_counts(d: Dataset) -> np.ndarray:
    return d.label_matrix().sum(axis=1, dtype=np.int64)


def label_cardinality(d: Dataset) -> float:
    if len(d) == 0:
        raise ValueError("label cardinality of an empty dataset is undefined")
    return int(_label_counts(d).sum()) / len(d)


def label_density(d: Dataset) -> float:
    return label_cardinality(d) / len(d.vocabulary)


def concept_frequency_histogram(d: Dataset, top_n: int) -> list[tuple[str, int]]:
    """Number of samples per concept, most frequent first, ties by ascending id."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    counts = d.label_matrix().sum(axis=0, dtype=np.int64)
    pairs = [(d.vocabulary[i], int(c)) for i, c in enumerate(counts) if c > 0]
    pairs.sort(key=lambda pc: (-pc[1], pc[0].encode("utf-8")))
    return pairs[:top_n]


def cui_count_histogram(d: Dataset, max_count: int) -> dict[int, int]:
    """``{c: number of samples with exactly c labels}`` for 1 <= c <= max_count."""
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    hist = Counter(int(c) for c in _label_counts(d) if 1 <= c <= max_count)
    return dict(sorted(hist.items()))
