"""Dataset ingestion, imbalance ratios, IR-targeted subsampling and stratified folds.

Labels are always stored as ``+1`` (minority / positive) and ``-1``
(majority / negative).  Raw multiclass files are binarized through a JSON
manifest that lists which raw labels go to each side.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyClass,
    InvalidDataset,
    ParseError,
    TooFewSamples,
    UnachievableIR,
)

log = logging.getLogger(__name__)

MIN_RETAINED_POSITIVES = 5


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with +1/-1 labels.

    Arrays are made read-only on construction so a dataset can be shared
    between folds and workers without defensive copies.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise InvalidDataset("features must be a 2-D matrix")
        m, d = X.shape
        if m < 2 or d < 1:
            raise InvalidDataset(f"need m >= 2 and d >= 1, got {X.shape}")
        if y.shape != (m,):
            raise InvalidDataset(f"labels shape {y.shape} does not match {m} rows")
        if not np.all(np.isfinite(X)):
            raise InvalidDataset("features contain non-finite values")
        if not np.all((y == 1) | (y == -1)):
            raise InvalidDataset("labels must be +1 or -1")
        if not np.any(y == 1):
            raise EmptyClass("positive")
        if not np.any(y == -1):
            raise EmptyClass("negative")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == -1))

    @property
    def positives(self) -> np.ndarray:
        return self.features[self.labels == 1]

    @property
    def negatives(self) -> np.ndarray:
        return self.features[self.labels == -1]

    def subset(self, idx, name: str | None = None) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.features[idx], self.labels[idx], name or self.name)

    def to_csv(self, path) -> None:
        """Write the dataset as ``f0..f{d-1},label`` with +1/-1 labels."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"f{j}" for j in range(self.d)] + ["label"])
            for row, lab in zip(self.features, self.labels):
                w.writerow([repr(float(v)) for v in row] + [int(lab)])


@dataclass(frozen=True)
class DatasetManifest:
    source_path: Path
    label_column: int | str
    positive_classes: frozenset
    negative_classes: frozenset
    normalize: bool = True
    name: str | None = None

    def __post_init__(self):
        pos = frozenset(str(v) for v in self.positive_classes)
        neg = frozenset(str(v) for v in self.negative_classes)
        if not pos or not neg:
            raise InvalidDataset("positive_classes and negative_classes must be non-empty")
        if pos & neg:
            raise InvalidDataset(f"labels listed in both class sets: {sorted(pos & neg)}")
        object.__setattr__(self, "positive_classes", pos)
        object.__setattr__(self, "negative_classes", neg)
        object.__setattr__(self, "source_path", Path(self.source_path))

    @classmethod
    def from_json(cls, path) -> "DatasetManifest":
        """Read a manifest; a relative ``source_path`` resolves against the manifest's folder."""
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
        missing = {"source_path", "label_column", "positive_classes", "negative_classes"} - cfg.keys()
        if missing:
            raise InvalidDataset(f"manifest {path} lacks keys {sorted(missing)}")
        src = Path(cfg["source_path"])
        if not src.is_absolute():
            src = path.parent / src
        return cls(
            source_path=src,
            label_column=cfg["label_column"],
            positive_classes=frozenset(cfg["positive_classes"]),
            negative_classes=frozenset(cfg["negative_classes"]),
            normalize=bool(cfg.get("normalize", True)),
            name=cfg.get("name") or path.stem,
        )


def _label_to_str(v) -> str:
    s = str(v).strip()
    # "1.0" in a CSV should still match a manifest entry of 1
    try:
        f = float(s)
    except ValueError:
        return s
    if f.is_integer():
        return str(int(f))
    return s


def minmax_scale(X: np.ndarray) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns become 0."""
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    return out


def load_dataset(manifest: DatasetManifest) -> LabeledDataset:
    src = manifest.source_path
    if not src.exists():
        raise FileNotFoundError(str(src))
    pos_set = {_label_to_str(v) for v in manifest.positive_classes}
    neg_set = {_label_to_str(v) for v in manifest.negative_classes}

    with open(src, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidDataset(f"{src} is empty")
        header = [h.strip() for h in header]
        lc = manifest.label_column
        if isinstance(lc, str) and not lc.lstrip("-").isdigit():
            if lc not in header:
                raise InvalidDataset(f"label column {lc!r} not in header {header}")
            lc = header.index(lc)
        lc = int(lc) % len(header)
        feat_cols = [j for j in range(len(header)) if j != lc]

        rows, labels = [], []
        dropped = 0
        for r, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(r, None, f"expected {len(header)} fields, got {len(rec)}")
            lab = _label_to_str(rec[lc])
            if lab in pos_set:
                y = 1
            elif lab in neg_set:
                y = -1
            else:
                dropped += 1
                continue
            vals = []
            for j in feat_cols:
                try:
                    v = float(rec[j])
                except ValueError:
                    raise ParseError(r, header[j], rec[j]) from None
                if not math.isfinite(v):
                    raise ParseError(r, header[j], rec[j])
                vals.append(v)
            rows.append(vals)
            labels.append(y)

    if dropped:
        log.info("%s: dropped %d rows with labels outside both class sets", src.name, dropped)
    y = np.asarray(labels, dtype=np.int64)
    if not np.any(y == 1):
        raise EmptyClass("positive")
    if not np.any(y == -1):
        raise EmptyClass("negative")
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(feat_cols))
    if np.count_nonzero(y == 1) > np.count_nonzero(y == -1):
        raise InvalidDataset(
            "positive class must be the minority; swap positive_classes and negative_classes"
        )
    if manifest.normalize:
        X = minmax_scale(X)
    return LabeledDataset(X, y, manifest.name or src.stem)


def imbalance_ratio(ds: LabeledDataset) -> float:
    return ds.n_neg / ds.n_pos


def format_ir(ir: float) -> str:
    return f"{ir:.2f}"


def subsample_to_ir(ds: LabeledDataset, target_ir: float, seed: int) -> LabeledDataset:
    """Shrink one or both classes so that n_neg / n_pos lands on ``target_ir``.

    Nothing is ever duplicated: the result is a subset of ``ds`` in the
    original row order.  When the positives have to shrink, negatives are
    trimmed afterwards to ``floor(n_pos' * target_ir)`` so the achieved IR
    is within ``1 / n_pos'`` of the target.
    """
    if not target_ir >= 1:
        raise UnachievableIR(f"target IR must be >= 1, got {target_ir}")
    pos_idx = np.flatnonzero(ds.labels == 1)
    neg_idx = np.flatnonzero(ds.labels == -1)
    n_pos, n_neg = len(pos_idx), len(neg_idx)
    eps = 1e-9
    if target_ir >= n_neg / n_pos:
        keep_pos = math.floor(n_neg / target_ir + eps)
        keep_neg = min(n_neg, math.floor(keep_pos * target_ir + eps))
    else:
        keep_pos = n_pos
        keep_neg = math.floor(n_pos * target_ir + eps)
    if keep_pos < MIN_RETAINED_POSITIVES:
        raise UnachievableIR(
            f"IR {target_ir} leaves {keep_pos} positives (< {MIN_RETAINED_POSITIVES})"
        )
    rng = np.random.default_rng(seed)
    if keep_pos < n_pos:
        pos_idx = rng.choice(pos_idx, size=keep_pos, replace=False)
    if keep_neg < n_neg:
        neg_idx = rng.choice(neg_idx, size=keep_neg, replace=False)
    idx = np.sort(np.concatenate([pos_idx, neg_idx]))
    return ds.subset(idx)


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    seed: int
    assignments: np.ndarray
    requested_folds: int | None = None
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "assignments", _frozen(np.asarray(self.assignments, dtype=np.int64)))

    @property
    def adjusted(self) -> bool:
        return self.requested_folds is not None and self.requested_folds != self.n_folds

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignments == fold
        return np.flatnonzero(~test), np.flatnonzero(test)

    def __iter__(self):
        for f in range(self.n_folds):
            yield self.split(f)


def stratified_folds(ds: LabeledDataset, n_folds: int, seed: int) -> FoldPlan:
    """Deal each class's shuffled indices round-robin over the folds.

    Positives are dealt first and negatives continue where the positives
    stopped, so both per-class counts and total fold sizes differ by at
    most one between folds.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    if ds.n_pos < 2 or ds.n_neg < 2:
        raise TooFewSamples(f"need >= 2 samples per class, got ({ds.n_pos}, {ds.n_neg})")
    requested = n_folds
    notes = ()
    if ds.n_pos < n_folds:
        n_folds = ds.n_pos
        notes = (f"folds reduced from {requested} to {n_folds}: only {ds.n_pos} positives",)
        log.warning("%s: %s", ds.name, notes[0])
    rng = np.random.default_rng(seed)
    assign = np.empty(ds.m, dtype=np.int64)
    offset = 0
    for lab in (1, -1):
        idx = rng.permutation(np.flatnonzero(ds.labels == lab))
        assign[idx] = (offset + np.arange(len(idx))) % n_folds
        offset = (offset + len(idx)) % n_folds
    return FoldPlan(n_folds, seed, assign, requested, notes)


def dataset_from_arrays(X: Sequence, y: Iterable, name: str = "dataset") -> LabeledDataset:
    """Build a dataset from any 0/1, -1/+1 or boolean label vector (truthy = +1)."""
    y = np.asarray(list(y))
    if y.dtype == bool or set(np.unique(y)) <= {0, 1}:
        y = np.where(y.astype(bool), 1, -1)
    return LabeledDataset(np.asarray(X, dtype=float), y, name)
