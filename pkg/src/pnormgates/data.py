"""Dataset ingestion: CSV vector data, MiniBooNE files and sentence corpora.

Vector datasets keep one sample per row; ``minibatches`` transposes to the
``(features, batch)`` layout the networks consume.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .numeric import Rng

MAX_SEQUENCE_CHARS = 100
UNKNOWN = "\x00"
STD_FLOOR = 1e-8


class IngestionError(ValueError):
    """Malformed input file; the message names the offending row."""


class DataError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class VectorDataset:
    features: np.ndarray          # (n, d)
    labels: np.ndarray            # (n,), ints in 0..n_classes-1
    n_classes: int
    label_names: tuple = ()
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "VectorDataset":
        return replace(self, features=self.features[idx], labels=self.labels[idx])


@dataclass(frozen=True)
class CharCorpus:
    vocabulary: tuple             # vocabulary[0] is the unknown symbol
    sequences: tuple              # tuple of int arrays

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    @property
    def n_chars(self) -> int:
        return sum(len(s) for s in self.sequences)

    @property
    def n_predictions(self) -> int:
        return sum(len(s) - 1 for s in self.sequences)

    def encode(self, text: str) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.vocabulary)}
        return np.array([index.get(c, 0) for c in text], dtype=np.intp)


def _parse_label_column(spec, arity: int) -> int:
    if spec in ("last", -1):
        return arity - 1
    if spec == "first":
        return 0
    col = int(spec)
    if not -arity <= col < arity:
        raise ConfigError(f"label column {spec} outside rows of arity {arity}")
    return col % arity


def _build(rows: list[tuple[int, list[str]]], label_column, label_map: dict | None):
    arity = len(rows[0][1])
    col = _parse_label_column(label_column, arity)
    feats = np.empty((len(rows), arity - 1))
    raw_labels = []
    for i, (lineno, row) in enumerate(rows):
        if len(row) != arity:
            raise IngestionError(f"row {lineno}: expected {arity} fields, found {len(row)}")
        try:
            feats[i] = [float(v) for j, v in enumerate(row) if j != col]
        except ValueError as exc:
            raise IngestionError(f"row {lineno}: unparseable number ({exc})") from None
        raw_labels.append((lineno, row[col].strip()))
    if not np.all(np.isfinite(feats)):
        bad = int(np.nonzero(~np.isfinite(feats).all(axis=1))[0][0])
        raise IngestionError(f"row {rows[bad][0]}: non-finite feature value")
    if label_map is None:
        names = sorted({lab for _, lab in raw_labels}, key=_label_sort_key)
        label_map = {name: i for i, name in enumerate(names)}
    labels = np.empty(len(rows), dtype=np.intp)
    for i, (lineno, lab) in enumerate(raw_labels):
        if lab not in label_map:
            raise IngestionError(f"row {lineno}: unknown label {lab!r}")
        labels[i] = label_map[lab]
    names = tuple(sorted(label_map, key=label_map.get))
    return VectorDataset(feats, labels, len(label_map), names)


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def load_csv(path, label_column="last", delimiter: str | None = ",", header: bool = False,
             label_map: dict | None = None) -> VectorDataset:
    """Read a delimited file with one sample per row.

    ``delimiter=None`` splits on runs of whitespace. Labels are mapped to
    contiguous indices in sorted order unless ``label_map`` is given.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        if delimiter is None:
            lines = ((i, line.split()) for i, line in enumerate(fh, 1))
        else:
            lines = enumerate(csv.reader(fh, delimiter=delimiter), 1)
        for lineno, row in lines:
            if header and lineno == 1:
                continue
            if not row or all(not v.strip() for v in row):
                continue
            rows.append((lineno, row))
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return _build(rows, label_column, label_map)


def load_miniboone(path) -> VectorDataset:
    """Read the UCI MiniBooNE file.

    The first line holds the signal and background counts; signal rows come
    first and get label 1, background rows label 0.
    """
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        try:
            n_signal, n_background = int(head[0]), int(head[1])
        except (IndexError, ValueError):
            raise IngestionError("row 1: expected '<signal count> <background count>'") from None
        feats = []
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            try:
                feats.append([float(v) for v in parts])
            except ValueError as exc:
                raise IngestionError(f"row {lineno}: unparseable number ({exc})") from None
            if len(feats[-1]) != len(feats[0]):
                raise IngestionError(
                    f"row {lineno}: expected {len(feats[0])} fields, found {len(feats[-1])}")
    if len(feats) != n_signal + n_background:
        raise IngestionError(
            f"header announces {n_signal + n_background} rows, file has {len(feats)}")
    labels = np.r_[np.ones(n_signal, dtype=np.intp), np.zeros(n_background, dtype=np.intp)]
    return VectorDataset(np.array(feats), labels, 2, ("background", "signal"))


def split(ds: VectorDataset, rng: Rng, train_count: int | None = None,
          valid_count: int | None = None, train_fraction: float | None = None):
    """Seeded uniform split into disjoint train / validation sets.

    With explicit counts both are honoured exactly; otherwise
    ``train_fraction`` of the rows go to training and the rest to validation.
    """
    perm = rng.permutation(ds.n)
    if train_count is not None:
        valid_count = ds.n - train_count if valid_count is None else valid_count
        if train_count < 1 or valid_count < 0 or train_count + valid_count > ds.n:
            raise ConfigError(
                f"split counts {train_count}+{valid_count} exceed {ds.n} rows")
    else:
        frac = 0.8 if train_fraction is None else train_fraction
        if not 0 < frac <= 1:
            raise ConfigError(f"train fraction {frac} not in (0, 1]")
        train_count = max(1, int(round(frac * ds.n)))
        valid_count = ds.n - train_count
    return (ds.subset(np.sort(perm[:train_count])),
            ds.subset(np.sort(perm[train_count:train_count + valid_count])))


def standardize(train: VectorDataset, valid: VectorDataset | None = None):
    """Zero-mean / unit-variance scaling with statistics from ``train`` only.

    Constant columns keep their (zero) centred value: their std is floored.
    """
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    out = [replace(train, features=(train.features - mean) / std, mean=mean, std=std)]
    if valid is not None:
        out.append(replace(valid, features=(valid.features - mean) / std, mean=mean, std=std))
    return tuple(out) if valid is not None else out[0]


def minibatches(ds: VectorDataset, batch_size: int, rng: Rng | None = None
                ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(x, y)`` with ``x`` of shape ``(d, batch)``; reshuffles when ``rng`` is given."""
    if batch_size < 1:
        raise ConfigError("batch size must be positive")
    order = rng.permutation(ds.n) if rng is not None else np.arange(ds.n)
    for start in range(0, ds.n, batch_size):
        idx = order[start:start + batch_size]
        yield ds.features[idx].T, ds.labels[idx]


def make_surrogate(n: int = 20000, d: int = 50, seed: int = 0,
                   components: int = 4, separation: float = 0.9) -> VectorDataset:
    """Two-class data drawn from two overlapping Gaussian mixtures.

    Each class owns ``components`` unit-variance Gaussians whose means are
    random directions of length ``separation * sqrt(components)``; the
    classes overlap, so the Bayes error is well above zero.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    scale = separation * np.sqrt(components)
    means = rng.standard_normal((2, components, d))
    means *= scale / np.linalg.norm(means, axis=2, keepdims=True)
    labels = rng.integers(0, 2, n)
    comp = rng.integers(0, components, n)
    # anisotropic noise keeps the features from being trivially whitened
    scales = np.exp(rng.uniform(-0.5, 0.5, d))
    feats = means[labels, comp] + rng.standard_normal((n, d)) * scales
    return VectorDataset(feats, labels.astype(np.intp), 2, ("0", "1"))


def read_sentences(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line.rstrip("\r") for line in text.split("\n")]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise DataError(f"{path}: corpus is empty")
    return lines


def build_corpus(train_lines, valid_lines=()) -> tuple[CharCorpus, CharCorpus]:
    """Truncate, build the vocabulary from ``train_lines`` and encode both sets.

    Lines shorter than two characters after truncation are dropped since
    they contain no prediction target.
    """
    train_lines = [line[:MAX_SEQUENCE_CHARS] for line in train_lines]
    valid_lines = [line[:MAX_SEQUENCE_CHARS] for line in valid_lines]
    vocab = (UNKNOWN,) + tuple(sorted({c for line in train_lines for c in line} - {UNKNOWN}))
    index = {c: i for i, c in enumerate(vocab)}

    def encode(lines):
        return tuple(np.array([index.get(c, 0) for c in line], dtype=np.intp)
                     for line in lines if len(line) >= 2)

    return CharCorpus(vocab, encode(train_lines)), CharCorpus(vocab, encode(valid_lines))


def load_corpus(path, train_sents: int, valid_sents: int, rng: Rng
                ) -> tuple[CharCorpus, CharCorpus]:
    """Sample sentences without replacement and encode them.

    If the file holds fewer than ``train_sents + valid_sents`` lines, the
    training sample is filled first and validation gets what remains.
    """
    lines = read_sentences(path)
    take = min(len(lines), train_sents + valid_sents)
    chosen = [lines[i] for i in rng.choice(len(lines), take)]
    return build_corpus(chosen[:train_sents], chosen[train_sents:])


_SUBJECTS = ["the company", "the bank", "analysts", "the government", "investors",
             "the minister", "shares", "the market", "officials", "the group",
             "a spokesman", "the board", "traders", "the central bank", "exporters"]
_VERBS = ["said", "expected", "reported", "announced", "rose", "fell", "agreed",
          "planned", "warned", "estimated", "denied", "confirmed", "raised", "cut"]
_OBJECTS = ["profits", "a new deal", "interest rates", "the merger", "its forecast",
            "quarterly earnings", "the offer", "prices", "the stake", "net income",
            "sales", "the tariff", "output", "the plan", "its debt"]
_TAILS = ["on monday", "last year", "in hong kong", "by 5 percent", "this week",
          "after the talks", "in the first quarter", "to 12 million dollars",
          "on friday", "in tokyo", "despite the slump", "in a statement"]


def make_synthetic_corpus(n: int, seed: int = 0) -> list[str]:
    """Newswire-flavoured sentences from a small stochastic grammar."""
    rng = np.random.Generator(np.random.PCG64(seed))

    def pick(words):
        return words[rng.integers(len(words))]

    out = []
    for _ in range(n):
        parts = [pick(_SUBJECTS), pick(_VERBS), pick(_OBJECTS)]
        for _ in range(rng.integers(0, 3)):
            parts.append(pick(_TAILS))
        if rng.random() < 0.3:
            parts += ["and", pick(_SUBJECTS), pick(_VERBS), pick(_OBJECTS)]
        sentence = " ".join(parts)
        out.append(sentence[0].upper() + sentence[1:] + ".")
    return out
