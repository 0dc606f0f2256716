"""Fuzzy membership schemes.

The three-way scheme scores every negative sample from two views:

* input space: the label entropy of its k nearest neighbours is mapped
  through three regions (R1: entropy >= alpha, R2: boundary, R3: entropy <= beta);
* feature space: the centered-kernel similarity to same-label neighbours
  minus that to other-label neighbours.

Positives always keep membership 1.  Two baseline schemes are included for
the FSVM and CKA-FSVM comparisons.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import LabeledDataset
from .errors import KTooLarge
from .kernel import KernelSpec, center_gram, gram

log = logging.getLogger(__name__)

# Floor used by the R1 branch; reused for every linear rescale so no
# membership is ever 0.
DELTA = 0.01


@dataclass(frozen=True)
class ThreeWayThresholds:
    k: int
    alpha: float
    beta: float


def thresholds_from_k(k: int) -> ThreeWayThresholds:
    if k < 1:
        raise ValueError("k must be >= 1")
    alpha = k / (k + 1)
    return ThreeWayThresholds(k, alpha, 1.0 - alpha)


def binary_entropy(num_same: int, k: int) -> float:
    """Entropy (bits) of the same/different split, with 0*log2(0) = 0."""
    h = 0.0
    for c in (num_same, k - num_same):
        if c > 0:
            p = c / k
            h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class NeighborProfile:
    indices: tuple
    num_same: int
    num_diff: int
    p_plus: float
    entropy: float

    @property
    def k(self) -> int:
        return self.num_same + self.num_diff

    @classmethod
    def from_counts(cls, num_same: int, num_diff: int, indices=()) -> "NeighborProfile":
        k = num_same + num_diff
        return cls(tuple(indices), num_same, num_diff, num_same / k, binary_entropy(num_same, k))


def neighbor_indices(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest rows for every row, itself excluded.

    Ties in distance are broken by ascending row index (stable sort).
    """
    m = X.shape[0]
    if k >= m:
        raise KTooLarge(f"k={k} must be < m={m}")
    if k < 1:
        raise ValueError("k must be >= 1")
    D = cdist(X, X, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def knn_profile(ds: LabeledDataset, i: int, k: int) -> NeighborProfile:
    if k >= ds.m:
        raise KTooLarge(f"k={k} must be < m={ds.m}")
    X = ds.features
    d = np.sum((X - X[i]) ** 2, axis=1)
    d[i] = np.inf
    nbrs = np.argsort(d, kind="stable")[:k]
    same = int(np.count_nonzero(ds.labels[nbrs] == ds.labels[i]))
    return NeighborProfile.from_counts(same, k - same, nbrs.tolist())


def region(entropy: float, th: ThreeWayThresholds) -> str:
    if entropy >= th.alpha:
        return "R1"
    if entropy <= th.beta:
        return "R3"
    return "R2"


def twf_value(entropy: float, p_plus: float, th: ThreeWayThresholds) -> float:
    reg = region(entropy, th)
    if reg == "R1":
        return 0.01
    if reg == "R3":
        return 1.0
    scale = th.alpha if p_plus < 0.5 else th.beta
    return math.exp(-scale * entropy / (th.alpha - th.beta))


def twf(profile: NeighborProfile, th: ThreeWayThresholds) -> float:
    if profile.k != th.k:
        raise ValueError(f"profile has k={profile.k}, thresholds k={th.k}")
    return twf_value(profile.entropy, profile.p_plus, th)


def kf(K_centered: np.ndarray, labels: np.ndarray, i: int, nbrs) -> float:
    """Sum of centered kernel values to same-label neighbours minus the rest."""
    idx = np.asarray(nbrs.indices if isinstance(nbrs, NeighborProfile) else nbrs, dtype=np.int64)
    m = K_centered.shape[0]
    if not 0 <= i < m or np.any((idx < 0) | (idx >= m)):
        raise IndexError(f"index out of range for a {m}x{m} Gram matrix")
    vals = K_centered[i, idx]
    same = labels[idx] == labels[i]
    return float(vals[same].sum() - vals[~same].sum())


def _rescale(v: np.ndarray, delta: float = DELTA) -> np.ndarray | None:
    """Affine map of ``v`` onto [delta, 1]; None when all values coincide."""
    lo, hi = v.min(), v.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi), abs(lo)):
        return None
    return delta + (1.0 - delta) * (v - lo) / (hi - lo)


@dataclass(frozen=True)
class MembershipTable:
    """Per-sample intermediate quantities of the three-way scheme."""

    labels: np.ndarray
    entropy: np.ndarray
    region: tuple
    twf: np.ndarray
    kf: np.ndarray
    membership: np.ndarray


def three_way_table(ds: LabeledDataset, k: int, spec: KernelSpec,
                    K: np.ndarray | None = None) -> MembershipTable:
    """Run the full three-way membership computation, keeping every stage.

    ``K`` may carry a precomputed self-Gram of ``ds.features`` under ``spec``.
    """
    th = thresholds_from_k(k)
    nbrs = neighbor_indices(ds.features, k)
    y = ds.labels
    same = np.count_nonzero(y[nbrs] == y[:, None], axis=1)
    p_plus = same / k
    entropy = np.array([binary_entropy(int(s), k) for s in same])
    regions = tuple(region(h, th) for h in entropy)
    twf_v = np.array([twf_value(h, p, th) for h, p in zip(entropy, p_plus)])

    if K is None:
        K = gram(ds.features, ds.features, spec)
    Kc = center_gram(K)
    vals = np.take_along_axis(Kc, nbrs, axis=1)
    sign = np.where(y[nbrs] == y[:, None], 1.0, -1.0)
    kf_v = np.sum(vals * sign, axis=1)

    s = np.ones(ds.m)
    neg = y == -1
    kf_norm = _rescale(kf_v[neg])
    if kf_norm is None:
        log.debug("all negatives share one KF value; KF_norm set to 1")
        kf_norm = np.ones(int(neg.sum()))
    twkf = twf_v[neg] * kf_norm
    scaled = _rescale(twkf)
    s[neg] = twkf if scaled is None else scaled
    return MembershipTable(y.copy(), entropy, regions, twf_v, kf_v, s)


def three_way_membership(ds: LabeledDataset, k: int, spec: KernelSpec,
                         K: np.ndarray | None = None) -> np.ndarray:
    return three_way_table(ds, k, spec, K).membership


def center_distance_membership(ds: LabeledDataset, delta: float = DELTA) -> np.ndarray:
    """Class-centre distance membership: ``1 - ||x - mean|| / (radius + delta)``."""
    s = np.empty(ds.m)
    for lab in (1, -1):
        idx = ds.labels == lab
        Xc = ds.features[idx]
        dist = np.linalg.norm(Xc - Xc.mean(axis=0), axis=1)
        s[idx] = 1.0 - dist / (dist.max() + delta)
    return s


def cka_membership(ds: LabeledDataset, spec: KernelSpec, delta: float = DELTA,
                   K: np.ndarray | None = None) -> np.ndarray:
    """Per-class rescaled sum of centered kernel values to same-class samples."""
    if K is None:
        K = gram(ds.features, ds.features, spec)
    Kc = center_gram(K)
    s = np.ones(ds.m)
    for lab in (1, -1):
        idx = np.flatnonzero(ds.labels == lab)
        if len(idx) < 2:
            continue
        block = Kc[np.ix_(idx, idx)]
        score = block.sum(axis=1) - np.diag(block)
        scaled = _rescale(score, delta)
        if scaled is not None:
            s[idx] = scaled
    return s
