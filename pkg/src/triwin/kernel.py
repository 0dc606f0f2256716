"""Linear and RBF kernels, Gram matrices and Gram centering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NotSquare, TooFewSamples


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (self.sigma2 > 0 and np.isfinite(self.sigma2)):
            raise ValueError(f"rbf kernel needs sigma2 > 0, got {self.sigma2}")

    @classmethod
    def rbf(cls, sigma2: float) -> "KernelSpec":
        return cls("rbf", float(sigma2))

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear", 1.0)


def kernel_eval(x, y, spec: KernelSpec) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    if spec.kind == "linear":
        return float(np.dot(x, y))
    diff = x - y
    return float(np.exp(-np.dot(diff, diff) / (2.0 * spec.sigma2)))


def gram(X1, X2, spec: KernelSpec) -> np.ndarray:
    """``K[i, j] = k(X1[i], X2[j])``.

    Squared distances come from ``cdist`` so identical rows give an exact
    zero distance (unit RBF diagonal) and self-Grams are exactly symmetric.
    """
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X1.shape[1] != X2.shape[1]:
        raise DimensionMismatch(f"{X1.shape[1]} vs {X2.shape[1]} columns")
    if spec.kind == "linear":
        return X1 @ X2.T
    return np.exp(cdist(X1, X2, "sqeuclidean") / (-2.0 * spec.sigma2))


def center_gram(K) -> np.ndarray:
    """Return ``H K H`` with ``H = I - ee^T/m``."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {K.shape}")
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    return K - row - col + K.mean()


def sigma2_heuristic(X) -> float:
    """Mean squared distance over all N^2 ordered pairs, self-pairs included.

    Uses the identity mean_ij ||xi - xj||^2 = 2 * mean_i ||xi - xbar||^2.
    Identical rows give 0, which ``KernelSpec`` rejects.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise TooFewSamples("sigma2 heuristic needs at least 2 samples")
    centered = X - X.mean(axis=0)
    return float(2.0 * np.mean(np.sum(centered * centered, axis=1)))
