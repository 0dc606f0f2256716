"""Twin (TWFTSVM / TSVM) and single-plane (SVM / FSVM / CKA-FSVM) classifiers.

Twin convention: plane 1 hugs the positive class A and keeps the
negatives B at distance >= 1 on its negative side; plane 2 hugs B and
keeps A on its positive side.  With H = [A e1] and G = [B e2] (or the
kernel-expanded ``[k(A, X) e1]`` / ``[k(B, X) e2]``)::

    dual 1:  min 1/2 a'G(H'H + c1 I)^-1 G'a - e'a,   0 <= a <= c2 * s_neg
    dual 2:  min 1/2 g'H(G'G + c3 I)^-1 H'g - e'g,   0 <= g <= c4 * s_pos
    u1 = -(H'H + c1 I)^-1 G'a,    u2 = (G'G + c3 I)^-1 H'g

A point is assigned to the nearer plane; ties go to the positive class.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .errors import DegeneratePlane, DimensionMismatch, NotConverged, NotPositiveDefinite
from .kernel import KernelSpec, gram
from .membership import DELTA, center_distance_membership, cka_membership
from .qp import DEFAULT_TOL, BoxQP, QPSolution, solve_box_qp, solve_svm_dual, spd_solve

log = logging.getLogger(__name__)

MODEL_FORMAT = "triwin-model"
MODEL_VERSION = 1
DENOMINATORS = ("class-block", "full-gram")


@dataclass(frozen=True)
class TwftsvmParams:
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    k_neighbors: int = 11
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_grid(cls, c13: float, c24: float, k_neighbors: int = 11,
                  kernel: KernelSpec | None = None) -> "TwftsvmParams":
        return cls(c13, c24, c13, c24, k_neighbors, kernel or KernelSpec())


@dataclass(frozen=True)
class TwinModel:
    mode: str
    w1: np.ndarray
    b1: float
    w2: np.ndarray
    b2: float
    norm1: float
    norm2: float
    kernel: KernelSpec
    basis: np.ndarray | None = None
    denominator: str = "class-block"

    def __post_init__(self):
        if not (self.norm1 > 0 and self.norm2 > 0):
            raise DegeneratePlane("plane norms must be positive")

    @property
    def n_features(self) -> int:
        return self.basis.shape[1] if self.mode == "kernel" else self.w1.shape[0]

    def plane_values(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        Z = gram(X, self.basis, self.kernel) if self.mode == "kernel" else X
        return Z @ self.w1 + self.b1, Z @ self.w2 + self.b2

    def distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        f1, f2 = self.plane_values(X)
        return np.abs(f1) / self.norm1, np.abs(f2) / self.norm2

    def predict(self, X) -> np.ndarray:
        d1, d2 = self.distances(X)
        return np.where(d1 <= d2, 1, -1)


@dataclass(frozen=True)
class FitReport:
    dual_objectives: tuple
    kkt_residuals: tuple
    support_counts: tuple
    iterations: tuple = (0, 0)


def _ridge_solve(M, B, ridge):
    """spd_solve with up to three x10 ridge escalations."""
    r = ridge
    for attempt in range(4):
        try:
            return spd_solve(M, B, r)
        except NotPositiveDefinite:
            if attempt == 3:
                raise
            nr = r * 10 if r > 0 else 1e-10
            log.warning("factorisation failed with ridge %g; retrying with %g", r, nr)
            r = nr


class TwinSystem:
    """The two twin duals for a fixed design (H, G) and regularisers (c1, c3).

    Everything here is independent of the box bounds, so one system can be
    reused across (c2, c4, membership) configurations.
    """

    def __init__(self, H: np.ndarray, G: np.ndarray, c1: float, c3: float):
        self.H = H
        self.G = G
        self.c1 = c1
        self.c3 = c3
        self.X1 = _ridge_solve(H.T @ H, G.T, c1)   # (H'H + c1 I)^-1 G'
        self.X2 = _ridge_solve(G.T @ G, H.T, c3)   # (G'G + c3 I)^-1 H'
        Q1 = G @ self.X1
        Q2 = H @ self.X2
        self.Q1 = 0.5 * (Q1 + Q1.T)
        self.Q2 = 0.5 * (Q2 + Q2.T)

    def box_problems(self, c2, c4, s_pos, s_neg) -> tuple[BoxQP, BoxQP]:
        m1, m2 = self.H.shape[0], self.G.shape[0]
        p1 = BoxQP(self.Q1, -np.ones(m2), c2 * np.asarray(s_neg, dtype=float))
        p2 = BoxQP(self.Q2, -np.ones(m1), c4 * np.asarray(s_pos, dtype=float))
        return p1, p2

    def solve(self, c2, c4, s_pos, s_neg, tol=DEFAULT_TOL):
        p1, p2 = self.box_problems(c2, c4, s_pos, s_neg)
        sol1 = solve_box_qp(p1, tol)
        sol2 = solve_box_qp(p2, tol)
        for sol in (sol1, sol2):
            if not sol.converged:
                raise NotConverged(sol.kkt_residual)
        u1 = -self.X1 @ sol1.alpha
        u2 = self.X2 @ sol2.alpha
        return u1, u2, sol1, sol2


def _design(Z: np.ndarray) -> np.ndarray:
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def _report(sol1: QPSolution, sol2: QPSolution) -> FitReport:
    return FitReport(
        (sol1.objective, sol2.objective),
        (sol1.kkt_residual, sol2.kkt_residual),
        (int(np.count_nonzero(sol1.alpha > 0)), int(np.count_nonzero(sol2.alpha > 0))),
        (sol1.iterations, sol2.iterations),
    )


def twin_model_from_solution(u1, u2, kernel: KernelSpec, basis=None, K_self=None,
                             pos=None, denominator="class-block") -> TwinModel:
    """Assemble a TwinModel and its decision denominators from (w, b) stacks."""
    w1, b1 = u1[:-1].copy(), float(u1[-1])
    w2, b2 = u2[:-1].copy(), float(u2[-1])
    if basis is None:
        n1, n2 = float(np.linalg.norm(w1)), float(np.linalg.norm(w2))
        mode = "linear"
    else:
        mode = "kernel"
        if denominator == "full-gram":
            q1 = w1 @ K_self @ w1
            q2 = w2 @ K_self @ w2
        elif denominator == "class-block":
            neg = ~pos
            q1 = w1[pos] @ K_self[np.ix_(pos, pos)] @ w1[pos]
            q2 = w2[neg] @ K_self[np.ix_(neg, neg)] @ w2[neg]
        else:
            raise ValueError(f"denominator must be one of {DENOMINATORS}")
        n1, n2 = float(np.sqrt(max(q1, 0.0))), float(np.sqrt(max(q2, 0.0)))
    if n1 < 1e-12 or n2 < 1e-12:
        raise DegeneratePlane(f"recovered plane norms ({n1:.3e}, {n2:.3e})")
    return TwinModel(mode, w1, b1, w2, b2, n1, n2, kernel,
                     None if basis is None else np.array(basis), denominator)


def fit_twftsvm(ds: LabeledDataset, s, p: TwftsvmParams, tol: float = DEFAULT_TOL,
                denominator: str = "class-block", K: np.ndarray | None = None):
    """Fit a twin model with per-sample memberships ``s``.

    A linear ``p.kernel`` trains in the input space (weights of length d);
    an RBF kernel trains on the kernel-expanded design (coefficients over
    all m training rows).  ``K`` may pass a precomputed self-Gram.
    Returns ``(TwinModel, FitReport)``.
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (ds.m,):
        raise DimensionMismatch(f"membership length {s.shape} != {ds.m}")
    pos = ds.labels == 1
    X = ds.features
    if p.kernel.kind == "linear":
        Z = X
        K = None
    else:
        if K is None:
            K = gram(X, X, p.kernel)
        Z = K
    system = TwinSystem(_design(Z[pos]), _design(Z[~pos]), p.c1, p.c3)
    u1, u2, sol1, sol2 = system.solve(p.c2, p.c4, s[pos], s[~pos], tol)
    model = twin_model_from_solution(
        u1, u2, p.kernel, None if p.kernel.kind == "linear" else X, K, pos, denominator)
    return model, _report(sol1, sol2)


def fit_tsvm(ds: LabeledDataset, params: TwftsvmParams, tol: float = DEFAULT_TOL,
             denominator: str = "class-block", K: np.ndarray | None = None):
    return fit_twftsvm(ds, np.ones(ds.m), params, tol, denominator, K)


def predict(model, X) -> np.ndarray:
    return model.predict(X)


@dataclass(frozen=True)
class SVMModel:
    alpha: np.ndarray
    y: np.ndarray
    support: np.ndarray
    bias: float
    kernel: KernelSpec
    caps: np.ndarray | None = None
    kkt_violation: float = 0.0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.support.shape[1]:
            raise DimensionMismatch(f"expected {self.support.shape[1]} features, got {X.shape[1]}")
        return gram(X, self.support, self.kernel) @ (self.alpha * self.y) + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)


def fit_fsvm(ds: LabeledDataset, s, spec: KernelSpec, C: float, tol: float = DEFAULT_TOL,
             K: np.ndarray | None = None) -> SVMModel:
    s = np.asarray(s, dtype=float)
    if s.shape != (ds.m,):
        raise DimensionMismatch(f"membership length {s.shape} != {ds.m}")
    if K is None:
        K = gram(ds.features, ds.features, spec)
    y = ds.labels.astype(float)
    caps = s * C
    sol = solve_svm_dual(K, y, caps, tol)
    return SVMModel(sol.alpha, y, np.array(ds.features), sol.bias, spec, caps, sol.kkt_violation)


def fit_svm(ds: LabeledDataset, spec: KernelSpec, C: float, tol: float = DEFAULT_TOL,
            K: np.ndarray | None = None) -> SVMModel:
    return fit_fsvm(ds, np.ones(ds.m), spec, C, tol, K)


def fit_center_fsvm(ds: LabeledDataset, spec: KernelSpec, C: float, delta: float = DELTA,
                    tol: float = DEFAULT_TOL, K: np.ndarray | None = None) -> SVMModel:
    """FSVM with class-centre distance memberships (the plain FSVM baseline)."""
    return fit_fsvm(ds, center_distance_membership(ds, delta), spec, C, tol, K)


def fit_cka_fsvm(ds: LabeledDataset, spec: KernelSpec, C: float, tol: float = DEFAULT_TOL,
                 K: np.ndarray | None = None) -> SVMModel:
    if K is None:
        K = gram(ds.features, ds.features, spec)
    return fit_fsvm(ds, cka_membership(ds, spec, K=K), spec, C, tol, K)


def save_model(model, path) -> None:
    """Write a model as an ``.npz`` archive; the layout is documented in the README."""
    spec = model.kernel
    common = dict(format=np.array(MODEL_FORMAT), version=np.array(MODEL_VERSION),
                  kernel_kind=np.array(spec.kind), sigma2=np.array(spec.sigma2))
    if isinstance(model, TwinModel):
        arrays = dict(
            kind=np.array("twin"), mode=np.array(model.mode),
            w1=model.w1, w2=model.w2, b=np.array([model.b1, model.b2]),
            norms=np.array([model.norm1, model.norm2]),
            denominator=np.array(model.denominator),
            basis=model.basis if model.basis is not None else np.zeros((0, 0)),
        )
    elif isinstance(model, SVMModel):
        arrays = dict(
            kind=np.array("svm"), alpha=model.alpha, y=model.y, support=model.support,
            bias=np.array(model.bias),
            caps=model.caps if model.caps is not None else np.zeros(0),
            kkt=np.array(model.kkt_violation),
        )
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    with open(path, "wb") as fh:
        np.savez(fh, **common, **arrays)


def load_model(path):
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != MODEL_FORMAT:
            raise ValueError(f"{path} is not a triwin model file")
        if int(z["version"]) != MODEL_VERSION:
            raise ValueError(f"unsupported model version {int(z['version'])}")
        spec = KernelSpec(str(z["kernel_kind"]), float(z["sigma2"]))
        if str(z["kind"]) == "twin":
            mode = str(z["mode"])
            b, norms = z["b"], z["norms"]
            return TwinModel(mode, z["w1"].copy(), float(b[0]), z["w2"].copy(), float(b[1]),
                             float(norms[0]), float(norms[1]), spec,
                             z["basis"].copy() if mode == "kernel" else None,
                             str(z["denominator"]))
        caps = z["caps"]
        return SVMModel(z["alpha"].copy(), z["y"].copy(), z["support"].copy(), float(z["bias"]),
                        spec, caps.copy() if caps.size else None, float(z["kkt"]))
