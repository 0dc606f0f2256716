"""Random over-/under-sampling and SMOTE for the SVM baselines.

All three return a balanced dataset and are deterministic for a given seed.
Original rows keep their order; synthetic or duplicated positives are
appended at the end.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import TooFewPositives
from .membership import neighbor_indices

SMOTE_K = 5


@dataclass(frozen=True)
class ResamplePlan:
    method: str
    seed: int = 0
    smote_k: int = SMOTE_K

    def __post_init__(self):
        if self.method not in ("ros", "rus", "smote"):
            raise ValueError(f"unknown resampling method {self.method!r}")

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        if self.method == "ros":
            return ros(ds, self.seed)
        if self.method == "rus":
            return rus(ds, self.seed)
        return smote(ds, self.smote_k, self.seed)


def _append_positives(ds: LabeledDataset, rows: np.ndarray) -> LabeledDataset:
    X = np.vstack([ds.features, rows])
    y = np.concatenate([ds.labels, np.ones(len(rows), dtype=np.int64)])
    return LabeledDataset(X, y, ds.name)


def ros(ds: LabeledDataset, seed: int) -> LabeledDataset:
    extra = ds.n_neg - ds.n_pos
    if extra <= 0:
        return ds
    rng = np.random.default_rng(seed)
    pos = ds.positives
    return _append_positives(ds, pos[rng.integers(0, len(pos), size=extra)])


def rus(ds: LabeledDataset, seed: int) -> LabeledDataset:
    if ds.n_neg <= ds.n_pos:
        return ds
    rng = np.random.default_rng(seed)
    neg_idx = np.flatnonzero(ds.labels == -1)
    keep = rng.choice(neg_idx, size=ds.n_pos, replace=False)
    idx = np.sort(np.concatenate([np.flatnonzero(ds.labels == 1), keep]))
    return ds.subset(idx)


def smote(ds: LabeledDataset, smote_k: int = SMOTE_K, seed: int = 0) -> LabeledDataset:
    """Interpolate ``n_neg - n_pos`` new positives towards random positive neighbours."""
    pos = ds.positives
    if len(pos) < 2:
        raise TooFewPositives(f"SMOTE needs >= 2 positives, got {len(pos)}")
    if not 1 <= smote_k < len(pos):
        raise TooFewPositives(f"smote_k={smote_k} must be in [1, {len(pos) - 1}]")
    extra = ds.n_neg - ds.n_pos
    if extra <= 0:
        return ds
    rng = np.random.default_rng(seed)
    nbrs = neighbor_indices(pos, smote_k)
    base = rng.integers(0, len(pos), size=extra)
    mate = nbrs[base, rng.integers(0, smote_k, size=extra)]
    gap = rng.random(extra)[:, None]
    synth = pos[base] + gap * (pos[mate] - pos[base])
    return _append_positives(ds, synth)
