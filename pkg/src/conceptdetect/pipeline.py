"""File formats: PGM images, feature CSVs, concepts/submission files, datasets.

A dataset directory looks like::

    root/
      concepts.tsv          sample_id<TAB>CUI1;CUI2;...
      features.csv          optional, sample_id,v1,v2,... (no header)
      DRCT/img01.pgm        images, optionally grouped by category
      img02.pgm

The sample id of an image is its file stem.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .labels import CATEGORIES, Dataset, LabeledSample, LabelVocabulary, build_vocabulary, check_concept_id, encode

CONCEPTS_FILE = "concepts.tsv"
FEATURES_FILE = "features.csv"
MAX_CONCEPTS = 100


# -- PGM ----------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit graymap as floats in [0, 1]."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, width, height, maxval = fields
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    width, height, maxval = int(width), int(height), int(maxval)
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit graymaps are supported (maxval {maxval})")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: raster has {len(raster)} bytes, expected {width * height}")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return img.astype(np.float64) / maxval


def write_pgm(path, image) -> None:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    raster = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(raster.tobytes())


# -- concepts / submission files ----------------------------------------------

def parse_concepts_text(text: str, source: str = "<concepts>") -> dict[str, list[str]]:
    """Parse ``sample_id<TAB>CUI;CUI`` lines. Duplicate concepts on a line collapse."""
    rows: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        sid, sep, rest = line.partition("\t")
        if not sep or not sid:
            raise ValueError(f"{source}:{lineno}: expected 'sample_id<TAB>concepts'")
        if sid in rows:
            raise ValueError(f"{source}:{lineno}: repeated sample_id {sid!r}")
        concepts = [check_concept_id(c) for c in rest.split(";") if c]
        rows[sid] = list(dict.fromkeys(concepts))
    return rows


def read_concepts_file(path) -> dict[str, list[str]]:
    return parse_concepts_text(Path(path).read_text(encoding="utf-8"), str(path))


def format_concepts(rows: dict[str, Sequence[str]]) -> str:
    return "".join(f"{sid}\t{';'.join(rows[sid])}\n" for sid in sorted(rows, key=lambda s: s.encode("utf-8")))


def write_concepts_file(path, rows: dict[str, Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_concepts(rows))


@dataclass(frozen=True)
class SubmissionRecord:
    sample_id: str
    concepts: tuple[str, ...]


def ranked_concepts(scores, vocab: LabelVocabulary, threshold: float, limit: int = MAX_CONCEPTS) -> tuple[str, ...]:
    """Concepts scoring >= threshold, best first, capped at ``limit``.

    Ties in score are ordered by ascending concept id.
    """
    scores = np.asarray(scores, dtype=np.float64)
    picked = [(-scores[i], vocab[i].encode("utf-8"), vocab[i]) for i in np.flatnonzero(scores >= threshold)]
    picked.sort()
    return tuple(c for _, _, c in picked[:limit])


def records_from_scores(sample_ids: Sequence[str], scores, vocab: LabelVocabulary,
                        threshold: float) -> list[SubmissionRecord]:
    """Submission records for a score matrix; samples with no concept are omitted."""
    out = []
    for sid, row in zip(sample_ids, scores):
        concepts = ranked_concepts(row, vocab, threshold)
        if concepts:
            out.append(SubmissionRecord(sid, concepts))
    return out


def _record_violations(sid: str, concepts: Sequence[str], where: str, vocab=None) -> list[str]:
    problems = []
    if not concepts:
        problems.append(f"{where}: sample {sid!r}: no concepts")
    if len(concepts) > MAX_CONCEPTS:
        problems.append(f"{where}: sample {sid!r}: concept limit exceeded ({len(concepts)} > {MAX_CONCEPTS})")
    seen = set()
    for c in concepts:
        if c in seen:
            problems.append(f"{where}: sample {sid!r}: repeated concept {c!r}")
        seen.add(c)
        if vocab is not None and c not in vocab:
            problems.append(f"{where}: sample {sid!r}: unknown concept {c!r}")
    return problems


def write_submission(path, records: Iterable[SubmissionRecord]) -> None:
    records = list(records)
    problems = []
    seen = set()
    for r in records:
        if r.sample_id in seen:
            problems.append(f"sample {r.sample_id!r}: repeated sample_id")
        seen.add(r.sample_id)
        for c in r.concepts:
            check_concept_id(c)
        problems += _record_violations(r.sample_id, r.concepts, "record")
    if problems:
        raise ValueError("invalid submission: " + "; ".join(problems))
    write_concepts_file(path, {r.sample_id: r.concepts for r in records})


def read_submission(path) -> list[SubmissionRecord]:
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for line in text.split("\n"):
        if line:
            sid, _, rest = line.partition("\t")
            out.append(SubmissionRecord(sid, tuple(rest.split(";")) if rest else ()))
    return out


def validate_submission(path, vocab: Optional[LabelVocabulary] = None) -> list[str]:
    """Return a list of violations; empty means the file is valid."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        return [f"cannot read {path}: {exc}"]
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        return [f"{path}: not valid UTF-8"]
    problems = []
    if "\r" in text:
        problems.append(f"{path}: CR characters found; lines must end with LF")
    seen = {}
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        where = f"line {lineno}"
        sid, sep, rest = line.partition("\t")
        if not sep or not sid:
            problems.append(f"{where}: malformed line (expected 'sample_id<TAB>concepts')")
            continue
        if sid in seen:
            problems.append(f"{where}: sample {sid!r}: repeated sample_id (first on line {seen[sid]})")
        else:
            seen[sid] = lineno
        concepts = rest.split(";") if rest else []
        if any(not c for c in concepts):
            problems.append(f"{where}: sample {sid!r}: empty concept entry")
            concepts = [c for c in concepts if c]
        problems += _record_violations(sid, concepts, where, vocab)
    return problems


# -- datasets -----------------------------------------------------------------

def _read_feature_csv(path) -> dict[str, np.ndarray]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected sample_id followed by values")
            sid = row[0]
            if sid in out:
                raise ValueError(f"{path}:{lineno}: repeated sample_id {sid!r}")
            try:
                out[sid] = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def find_samples(root) -> dict[str, tuple[Optional[str], Path | None]]:
    """Map sample_id -> (category, pgm path or None for feature rows)."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    found: dict[str, tuple[Optional[str], Path | None]] = {}

    def add(sid, cat, path):
        if sid in found:
            raise ValueError(f"sample {sid!r} appears more than once under {root}")
        found[sid] = (cat, path)

    for p in sorted(root.glob("*.pgm")):
        add(p.stem, None, p)
    for cat in CATEGORIES:
        if (root / cat).is_dir():
            for p in sorted((root / cat).glob("*.pgm")):
                add(p.stem, cat, p)
    if (root / FEATURES_FILE).is_file():
        for sid in _read_feature_csv(root / FEATURES_FILE):
            add(sid, None, None)
    return found


def load_inputs(root, ids: Optional[Iterable[str]] = None) -> list[tuple[str, np.ndarray, Optional[str]]]:
    """Load ``(sample_id, features, category)`` for every sample (or ``ids``), sorted by id."""
    root = Path(root)
    found = find_samples(root)
    vectors = _read_feature_csv(root / FEATURES_FILE) if (root / FEATURES_FILE).is_file() else {}
    wanted = sorted(found if ids is None else ids, key=lambda s: s.encode("utf-8"))
    out = []
    for sid in wanted:
        if sid not in found:
            raise FileNotFoundError(f"no image or feature row for sample {sid!r} under {root}")
        cat, path = found[sid]
        try:
            feats = read_pgm(path) if path is not None else vectors[sid]
        except OSError as exc:
            raise ValueError(f"unreadable sample {sid!r}: {exc}") from None
        out.append((sid, feats, cat))
    return out


def load_dataset(root, vocab: Optional[LabelVocabulary] = None, concepts_path=None) -> Dataset:
    root = Path(root)
    concepts_path = Path(concepts_path) if concepts_path is not None else root / CONCEPTS_FILE
    if not concepts_path.is_file():
        raise FileNotFoundError(f"concepts file not found: {concepts_path}")
    rows = read_concepts_file(concepts_path)
    if not rows:
        raise ValueError(f"{concepts_path}: empty concepts file")
    for sid, concepts in rows.items():
        if not concepts:
            raise ValueError(f"{concepts_path}: sample {sid!r} has no concepts")
    if vocab is None:
        vocab = build_vocabulary(rows.values())
    samples = []
    for sid, feats, cat in load_inputs(root, rows):
        try:
            labels = encode(rows[sid], vocab)
        except KeyError as exc:
            raise ValueError(f"sample {sid!r}: {exc.args[0]}") from None
        samples.append(LabeledSample(sid, feats, labels, cat))
    return Dataset(vocab, tuple(samples))


def write_dataset(d: Dataset, root) -> None:
    """Write images, feature rows and the concepts file so that
    :func:`load_dataset` reads the same dataset back."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    vectors = []
    for s in d.samples:
        if s.features is None:
            raise ValueError(f"sample {s.sample_id!r} has no features")
        if s.is_image:
            folder = root / s.category if s.category else root
            folder.mkdir(exist_ok=True)
            write_pgm(folder / f"{s.sample_id}.pgm", s.features)
        else:
            vectors.append([s.sample_id] + ["%.17g" % v for v in s.features])
    if vectors:
        with open(root / FEATURES_FILE, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(vectors)
    write_concepts_file(root / CONCEPTS_FILE,
                        {s.sample_id: [d.vocabulary[i] for i in np.flatnonzero(s.labels)] for s in d.samples})
