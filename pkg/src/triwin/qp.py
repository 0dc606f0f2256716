"""Convex QP solvers used by the twin and classic SVM duals.

``solve_box_qp``   min 1/2 a'Qa + c'a  s.t. 0 <= a <= u
``solve_svm_dual`` min 1/2 sum y_i y_j a_i a_j K_ij - sum a_i
                   s.t. y'a = 0, 0 <= a <= caps       (SMO)
``spd_solve``      (M + ridge I)^-1 B via Cholesky
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotConverged, NotPositiveDefinite

DEFAULT_TOL = 1e-6
_TAU = 1e-12


@dataclass(frozen=True)
class BoxQP:
    Q: np.ndarray
    linear: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        Q = np.ascontiguousarray(self.Q, dtype=np.float64)
        c = np.ascontiguousarray(self.linear, dtype=np.float64).ravel()
        u = np.ascontiguousarray(self.upper, dtype=np.float64).ravel()
        n = c.shape[0]
        if Q.shape != (n, n) or u.shape != (n,):
            raise DimensionMismatch(f"Q {Q.shape}, linear {c.shape}, upper {u.shape}")
        if n and np.max(np.abs(Q - Q.T)) > 1e-10 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("Q must be symmetric")
        if np.any(~(u > 0)):
            raise ValueError("upper bounds must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "linear", c)
        object.__setattr__(self, "upper", u)

    @property
    def n(self) -> int:
        return self.linear.shape[0]

    def objective(self, a) -> float:
        return float(0.5 * a @ self.Q @ a + self.linear @ a)

    def gradient(self, a) -> np.ndarray:
        return self.Q @ a + self.linear

    def kkt_residual(self, a) -> float:
        if self.n == 0:
            return 0.0
        g = self.gradient(a)
        return float(np.max(np.abs(np.clip(a - g, 0.0, self.upper) - a)))


@dataclass(frozen=True)
class QPSolution:
    alpha: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool = True
    history: list = field(default_factory=list, repr=False)


@nb.njit(cache=True)
def _cd_sweeps(Q, lin, upper, alpha, grad, max_sweeps, tol):
    """Cyclic projected coordinate descent.

    Runs until the KKT residual drops to ``tol`` or ``max_sweeps`` sweeps
    have been done.  ``grad`` is recomputed exactly after every sweep so
    incremental rounding never accumulates.  Returns (sweeps, residual).
    """
    n = alpha.shape[0]
    res = np.inf
    for sweep in range(max_sweeps):
        for i in range(n):
            qii = Q[i, i]
            gi = grad[i]
            old = alpha[i]
            if qii > 0.0:
                new = old - gi / qii
            elif gi > 0.0:
                new = 0.0
            elif gi < 0.0:
                new = upper[i]
            else:
                new = old
            if new < 0.0:
                new = 0.0
            elif new > upper[i]:
                new = upper[i]
            d = new - old
            if d != 0.0:
                alpha[i] = new
                for t in range(n):
                    grad[t] += d * Q[t, i]
        res = 0.0
        for t in range(n):
            g = lin[t]
            for s in range(n):
                g += Q[t, s] * alpha[s]
            grad[t] = g
            p = alpha[t] - g
            if p < 0.0:
                p = 0.0
            elif p > upper[t]:
                p = upper[t]
            r = abs(p - alpha[t])
            if r > res:
                res = r
        if res <= tol:
            return sweep + 1, res
    return max_sweeps, res


def _face_minimizer(QFF, rhs):
    try:
        x = np.linalg.solve(QFF, rhs)
        if np.all(np.isfinite(x)) and np.allclose(QFF @ x, rhs, rtol=1e-9, atol=1e-10):
            return x
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(QFF, rhs, rcond=None)[0]


def _active_set_polish(p: BoxQP, alpha: np.ndarray, tol: float, max_steps: int) -> int:
    """Primal active-set refinement started from the coordinate-descent iterate.

    Each step minimises the objective over the current free face and moves
    towards that minimiser as far as the box allows (ratio test), so every
    accepted step is a descent step and every iterate stays feasible.
    Bound variables whose gradient points into the box are released.
    Works in place; returns the number of steps taken.
    """
    u = p.upper
    Q, c = p.Q, p.linear
    f_old = p.objective(alpha)
    for step in range(max_steps):
        g = Q @ alpha + c
        if float(np.max(np.abs(np.clip(alpha - g, 0.0, u) - alpha))) <= tol:
            return step
        at_lo = alpha <= 0.0
        at_up = alpha >= u
        free = ~(at_lo | at_up) | (at_lo & (g < 0)) | (at_up & (g > 0))
        moved = False
        while free.any():
            F = np.flatnonzero(free)
            B = np.flatnonzero(~free)
            rhs = -(c[F] + Q[np.ix_(F, B)] @ alpha[B])
            d = _face_minimizer(Q[np.ix_(F, F)], rhs) - alpha[F]
            aF = alpha[F]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(d < 0, aF / -d, np.where(d > 0, (u[F] - aF) / d, np.inf))
            t = min(1.0, float(ratio.min()))
            if t <= 0.0:
                free[F[ratio <= 0.0]] = False
                continue
            cand = alpha.copy()
            cand[F] = np.clip(aF + t * d, 0.0, u[F])
            if t < 1.0:
                hit = F[ratio <= t]
                cand[hit] = np.where(d[ratio <= t] < 0, 0.0, u[hit])
            f_new = p.objective(cand)
            if f_new > f_old + 1e-14 * max(1.0, abs(f_old)):
                return step
            alpha[:] = cand
            f_old = f_new
            moved = True
            break
        if not moved:
            return step
    return max_steps


def solve_box_qp(p: BoxQP, tol: float = DEFAULT_TOL, max_sweeps: int | None = None,
                 polish_every: int = 25, x0=None) -> QPSolution:
    """Minimise ``1/2 a'Qa + c'a`` over ``0 <= a <= u``.

    Cyclic coordinate descent; every ``polish_every`` sweeps an active-set
    refinement is attempted from the current iterate (0 disables it).  A run that exhausts
    ``max_sweeps`` comes back with ``converged=False``; it does not raise.
    """
    n = p.n
    if max_sweeps is None:
        max_sweeps = 10 * n + 1000
    if n == 0:
        return QPSolution(np.zeros(0), 0.0, 0.0, 0, True, [0.0])
    alpha = np.zeros(n) if x0 is None else np.clip(np.array(x0, dtype=float), 0.0, p.upper)
    grad = p.gradient(alpha)
    history = [p.objective(alpha)]
    done = 0
    res = p.kkt_residual(alpha)
    chunk = polish_every if polish_every > 0 else max_sweeps
    while res > tol and done < max_sweeps:
        k, res = _cd_sweeps(p.Q, p.linear, p.upper, alpha, grad, min(chunk, max_sweeps - done), tol)
        done += k
        history.append(p.objective(alpha))
        if res <= tol or polish_every <= 0:
            continue
        _active_set_polish(p, alpha, tol, max_steps=2 * n + 10)
        grad[:] = p.gradient(alpha)
        res = p.kkt_residual(alpha)
        history.append(p.objective(alpha))
    return QPSolution(alpha, p.objective(alpha), res, done, res <= tol, history)


@nb.njit(cache=True)
def _smo(Q, y, caps, alpha, G, tol, max_iter):
    """SMO with second-order working-set selection on ``Q = yy' * K``.

    ``G`` holds the gradient ``Q a - e`` and is updated in place.
    Returns (iterations, final maximal-violation gap).
    """
    n = alpha.shape[0]
    gap = np.inf
    for it in range(max_iter):
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < caps[t]) or (y[t] < 0 and alpha[t] > 0.0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0.0) or (y[t] < 0 and alpha[t] < caps[t]):
                v = y[t] * G[t]
                if v > gmax2:
                    gmax2 = v
                if i >= 0:
                    b = gmax + v
                    if b > 0.0:
                        a = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                        if a <= 0.0:
                            a = _TAU
                        score = -(b * b) / a
                        if score < best:
                            best = score
                            j = t
        gap = gmax + gmax2
        if i < 0 or j < 0 or gap < tol:
            return it, max(gap, 0.0) if np.isfinite(gap) else 0.0
        ci = caps[i]
        cj = caps[j]
        ai = alpha[i]
        aj = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni = ai + delta
            nj = aj + delta
            if diff > 0.0:
                if nj < 0.0:
                    nj = 0.0
                    ni = diff
            else:
                if ni < 0.0:
                    ni = 0.0
                    nj = -diff
            if diff > ci - cj:
                if ni > ci:
                    ni = ci
                    nj = ci - diff
            else:
                if nj > cj:
                    nj = cj
                    ni = cj + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni = ai - delta
            nj = aj + delta
            if total > ci:
                if ni > ci:
                    ni = ci
                    nj = total - ci
            else:
                if nj < 0.0:
                    nj = 0.0
                    ni = total
            if total > cj:
                if nj > cj:
                    nj = cj
                    ni = total - cj
            else:
                if ni < 0.0:
                    ni = 0.0
                    nj = total
        dai = ni - ai
        daj = nj - aj
        alpha[i] = ni
        alpha[j] = nj
        for t in range(n):
            G[t] += Q[t, i] * dai + Q[t, j] * daj
    return max_iter, gap


def _svm_bias(y, G, alpha, caps):
    """Average of ``-y_i G_i`` over free multipliers, else the bound midpoint."""
    yG = y * G
    at_up = alpha >= caps
    at_lo = alpha <= 0
    free = ~(at_up | at_lo)
    if free.any():
        rho = yG[free].mean()
    else:
        ub_mask = (at_up & (y < 0)) | (at_lo & (y > 0))
        lb_mask = (at_up & (y > 0)) | (at_lo & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = 0.5 * (ub + lb)
        else:
            rho = ub if np.isfinite(ub) else lb
    return -float(rho)


@dataclass(frozen=True)
class SVMDualSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    kkt_violation: float
    iterations: int
    converged: bool


def svm_dual_objective(K, y, alpha) -> float:
    ay = alpha * y
    return float(0.5 * ay @ K @ ay - alpha.sum())


def solve_svm_dual(K, y, caps, tol: float = DEFAULT_TOL, max_iter: int | None = None,
                   raise_on_failure: bool = True) -> SVMDualSolution:
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    caps = np.ascontiguousarray(np.broadcast_to(caps, y.shape), dtype=np.float64)
    n = y.shape[0]
    if K.shape != (n, n):
        raise DimensionMismatch(f"K {K.shape} vs {n} labels")
    if np.any(~(caps > 0)):
        raise ValueError("caps must be positive")
    if max_iter is None:
        max_iter = max(100_000, 200 * n)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    G = -np.ones(n)
    iters, gap = _smo(Q, y, caps, alpha, G, tol, max_iter)
    ok = gap < tol
    if not ok and raise_on_failure:
        raise NotConverged(gap)
    return SVMDualSolution(alpha, _svm_bias(y, G, alpha, caps),
                           svm_dual_objective(K, y, alpha), float(gap), int(iters), bool(ok))


def spd_solve(M, B, ridge: float = 0.0) -> np.ndarray:
    """Solve ``(M + ridge I) X = B`` through a Cholesky factorisation."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"M must be square, got {M.shape}")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    A = M + ridge * np.eye(M.shape[0]) if ridge else M
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return scipy.linalg.cho_solve(factor, B)
