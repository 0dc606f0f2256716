"""Metrics, cross-validated grid search and rank statistics.

The grid search reports, per algorithm, the configuration with the best
mean G-Means over the folds of one shared ``FoldPlan``.  Rank statistics
follow the usual Friedman / Nemenyi recipe for comparing classifiers over
several datasets.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import f as f_dist
from scipy.stats import rankdata

from .dataset import FoldPlan, LabeledDataset, stratified_folds
from .errors import DegenerateDenominator, EmptyTestClass, MissingEntry, TriwinError
from .kernel import KernelSpec, gram, sigma2_heuristic
from .membership import DELTA, center_distance_membership, cka_membership, three_way_membership
from .models import TwinSystem, _design, fit_fsvm, twin_model_from_solution
from .resample import SMOTE_K, ResamplePlan

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Confusion:
    tp: int
    fn_: int
    tn: int
    fp: int

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "Confusion":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        pos = y_true == 1
        return cls(int(np.sum(pos & (y_pred == 1))), int(np.sum(pos & (y_pred != 1))),
                   int(np.sum(~pos & (y_pred != 1))), int(np.sum(~pos & (y_pred == 1))))

    @property
    def sensitivity(self) -> float:
        if self.tp + self.fn_ == 0:
            raise EmptyTestClass("no positive test samples")
        return self.tp / (self.tp + self.fn_)

    @property
    def specificity(self) -> float:
        if self.tn + self.fp == 0:
            raise EmptyTestClass("no negative test samples")
        return self.tn / (self.tn + self.fp)


def g_means(c: Confusion) -> float:
    return math.sqrt(c.sensitivity * c.specificity)


def format_mean_std(scores) -> str:
    """``NN.NN±NN.NN`` on the 0-100 scale (population std)."""
    a = np.asarray(scores, dtype=float) * 100.0
    return f"{a.mean():05.2f}±{a.std():05.2f}"


# ---------------------------------------------------------------- seeds

def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed for a (master, parts...) tuple, independent of run order."""
    h = hashlib.blake2b(repr((int(master),) + tuple(parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


# ---------------------------------------------------------------- grids

BASELINE_SIGMA2 = (1e-2, 1e-1, 1e0, 1e1)
BASELINE_C = tuple(2.0 ** e for e in (-3, -1, 1, 3, 5, 7, 9, 10))
TWIN_C = tuple(2.0 ** e for e in range(-1, 6))
TWIN_K = (7, 9, 11, 13)

NAMED_AXES = {
    "full": dict(sigma2=BASELINE_SIGMA2, C=BASELINE_C, c13=TWIN_C, c24=TWIN_C, k=TWIN_K),
    "quick": dict(sigma2=(1e-1, 1e0), C=(1.0, 8.0), c13=(0.5, 2.0), c24=(0.5, 2.0), k=(7, 11)),
}


def grid_axes(grid=None) -> dict:
    """Resolve a named grid, a JSON/dict override, or None (the full grid).

    Overrides are merged on top of the full grid, e.g.
    ``{"sigma2": [1.0], "C": [1, 4]}``; ``"base"`` selects another named grid.
    A ``sigma2`` entry of ``"heuristic"`` uses the mean-squared-distance
    heuristic on each training fold.
    """
    if grid is None:
        grid = "full"
    if isinstance(grid, str):
        g = grid.strip()
        if g.startswith("{"):
            grid = json.loads(g)
        elif g in NAMED_AXES:
            return {k: tuple(v) for k, v in NAMED_AXES[g].items()}
        else:
            raise ValueError(f"unknown grid {grid!r}; named grids: {sorted(NAMED_AXES)}")
    grid = dict(grid)
    base = grid.pop("base", "full")
    axes = {k: tuple(v) for k, v in NAMED_AXES[base].items()}
    for k, v in grid.items():
        if k not in axes:
            raise ValueError(f"unknown grid axis {k!r}; axes: {sorted(axes)}")
        axes[k] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        if not axes[k]:
            raise ValueError(f"grid axis {k!r} is empty")
    return axes


def _sigma2_value(v):
    if isinstance(v, str):
        if v != "heuristic":
            raise ValueError(f"sigma2 must be a number or 'heuristic', got {v!r}")
        return None
    return float(v)


# ---------------------------------------------------------------- algorithms

def _kernel_for(sigma2, train: LabeledDataset) -> KernelSpec:
    return KernelSpec.rbf(sigma2 if sigma2 is not None else sigma2_heuristic(train.features))


class Algorithm:
    name = "?"

    def grid(self, axes: dict) -> list[dict]:
        raise NotImplementedError

    def fold_predictions(self, train, X_test, configs, seeds) -> list:
        """Predictions on ``X_test`` for every config; an Exception marks a failed fit."""
        raise NotImplementedError


class SVMFamily(Algorithm):
    """SVM, resampled SVMs and the fuzzy SVMs; configs are (sigma2, C)."""

    def __init__(self, name, resample=None, membership=None):
        self.name = name
        self.resample = resample
        self.membership = membership

    def grid(self, axes):
        return [dict(sigma2=_sigma2_value(s), C=float(c))
                for s, c in itertools.product(axes["sigma2"], axes["C"])]

    def _fit(self, train, cfg, seed):
        if self.resample is not None:
            k = min(SMOTE_K, train.n_pos - 1)
            train = ResamplePlan(self.resample, seed, k).apply(train)
        spec = _kernel_for(cfg["sigma2"], train)
        K = gram(train.features, train.features, spec)
        if self.membership == "center":
            s = center_distance_membership(train, DELTA)
        elif self.membership == "cka":
            s = cka_membership(train, spec, K=K)
        else:
            s = np.ones(train.m)
        return fit_fsvm(train, s, spec, cfg["C"], K=K)

    def fold_predictions(self, train, X_test, configs, seeds):
        out = []
        for cfg, seed in zip(configs, seeds):
            try:
                out.append(self._fit(train, cfg, seed).predict(X_test))
            except (TriwinError, np.linalg.LinAlgError, ValueError) as exc:
                out.append(exc)
        return out


class TwinFamily(Algorithm):
    """TSVM (uniform memberships) and TWFTSVM (three-way memberships).

    Gram matrices, twin systems and memberships are cached per fold, so a
    784-point grid costs one factorisation per (sigma2, c13) pair.
    """

    def __init__(self, name, fuzzy, denominator="class-block"):
        self.name = name
        self.fuzzy = fuzzy
        self.denominator = denominator

    def grid(self, axes):
        ks = axes["k"] if self.fuzzy else (None,)
        return [dict(sigma2=_sigma2_value(s), c13=float(a), c24=float(b), k=k)
                for s, a, b, k in itertools.product(axes["sigma2"], axes["c13"], axes["c24"], ks)]

    def fold_predictions(self, train, X_test, configs, seeds):
        pos = train.labels == 1
        kernels, systems, members = {}, {}, {}
        out = []
        for cfg in configs:
            try:
                s2 = cfg["sigma2"]
                if s2 not in kernels:
                    spec = _kernel_for(s2, train)
                    K = gram(train.features, train.features, spec)
                    kernels[s2] = (spec, K)
                spec, K = kernels[s2]
                key = (s2, cfg["c13"])
                if key not in systems:
                    systems[key] = TwinSystem(_design(K[pos]), _design(K[~pos]), cfg["c13"], cfg["c13"])
                system = systems[key]
                if self.fuzzy:
                    mkey = (s2, cfg["k"])
                    if mkey not in members:
                        members[mkey] = three_way_membership(train, cfg["k"], spec, K=K)
                    s = members[mkey]
                else:
                    s = np.ones(train.m)
                u1, u2, _, _ = system.solve(cfg["c24"], cfg["c24"], s[pos], s[~pos])
                model = twin_model_from_solution(u1, u2, spec, train.features, K, pos,
                                                 self.denominator)
                out.append(model.predict(X_test))
            except (TriwinError, np.linalg.LinAlgError, ValueError) as exc:
                out.append(exc)
        return out


ALGORITHM_NAMES = ("svm", "ros-svm", "rus-svm", "smote-svm", "fsvm", "cka-fsvm", "tsvm", "twftsvm")


def make_algorithm(name: str, denominator: str = "class-block") -> Algorithm:
    table = {
        "svm": lambda: SVMFamily("svm"),
        "ros-svm": lambda: SVMFamily("ros-svm", resample="ros"),
        "rus-svm": lambda: SVMFamily("rus-svm", resample="rus"),
        "smote-svm": lambda: SVMFamily("smote-svm", resample="smote"),
        "fsvm": lambda: SVMFamily("fsvm", membership="center"),
        "cka-fsvm": lambda: SVMFamily("cka-fsvm", membership="cka"),
        "tsvm": lambda: TwinFamily("tsvm", fuzzy=False, denominator=denominator),
        "twftsvm": lambda: TwinFamily("twftsvm", fuzzy=True, denominator=denominator),
    }
    if name not in table:
        raise ValueError(f"unknown algorithm {name!r}; valid names: {', '.join(ALGORITHM_NAMES)}")
    return table[name]()


# ---------------------------------------------------------------- grid search

@dataclass(frozen=True)
class FoldRecord:
    config_index: int
    config: dict
    fold: int
    se: float
    sp: float
    g_means: float
    failed: bool = False


@dataclass(frozen=True)
class ExperimentResult:
    dataset: str
    algorithm: str
    params: dict
    per_fold_gmeans: tuple
    mean: float
    std: float

    @classmethod
    def from_scores(cls, dataset, algorithm, params, scores) -> "ExperimentResult":
        a = np.asarray(scores, dtype=float)
        return cls(dataset, algorithm, dict(params), tuple(float(v) for v in a),
                   float(a.mean()), float(a.std()))

    def formatted(self) -> str:
        return format_mean_std(self.per_fold_gmeans)


@dataclass(frozen=True)
class GridSearchResult:
    best: ExperimentResult
    best_index: int
    records: tuple
    config_means: tuple
    failures: int = 0


def _run_fold(args):
    algorithm, train, test, configs, seeds = args
    return algorithm.fold_predictions(train, test.features, configs, seeds)


def _threads(workers) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("TRIWIN_THREADS")
    return max(1, int(env)) if env else 1


def grid_search_cv(ds: LabeledDataset, algorithm, grid=None, folds=10, seed: int = 0,
                   workers: int | None = None, seed_key: str | None = None) -> GridSearchResult:
    """Cross-validate every grid configuration and keep the best mean G-Means.

    ``folds`` is either a fold count or a ready ``FoldPlan``.  ``grid`` is a
    list of config dicts, or anything ``grid_axes`` accepts.  Resampling
    happens inside the algorithm, on training folds only.  Fits that fail
    score 0 for that fold and are logged.  Results are merged in
    (config, fold) order, so any worker count gives identical output.
    """
    if isinstance(algorithm, str):
        algorithm = make_algorithm(algorithm)
    if isinstance(grid, list):
        configs = [dict(c) for c in grid]
    else:
        configs = algorithm.grid(grid_axes(grid))
    if not configs:
        raise ValueError("empty grid")
    key = seed_key or ds.name
    plan = folds if isinstance(folds, FoldPlan) else stratified_folds(ds, folds, derive_seed(seed, key, "folds"))

    tasks = []
    for f, (tr, te) in enumerate(plan):
        seeds = [derive_seed(seed, key, algorithm.name, ci, f) for ci in range(len(configs))]
        tasks.append((algorithm, ds.subset(tr), ds.subset(te), configs, seeds))
    n_workers = min(_threads(workers), len(tasks))
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            fold_preds = list(pool.map(_run_fold, tasks))
    else:
        fold_preds = [_run_fold(t) for t in tasks]

    records, failures = [], 0
    scores = np.zeros((len(configs), plan.n_folds))
    for ci, cfg in enumerate(configs):
        for f, (_, _, test, _, _) in enumerate(tasks):
            pred = fold_preds[f][ci]
            if isinstance(pred, Exception):
                failures += 1
                log.warning("%s/%s fold %d config %s failed: %s",
                            ds.name, algorithm.name, f, cfg, pred)
                records.append(FoldRecord(ci, cfg, f, 0.0, 0.0, 0.0, True))
                continue
            c = Confusion.from_labels(test.labels, pred)
            gm = g_means(c)
            scores[ci, f] = gm
            records.append(FoldRecord(ci, cfg, f, c.sensitivity, c.specificity, gm))
    means = scores.mean(axis=1)
    best = int(np.argmax(means))  # first maximum wins ties
    result = ExperimentResult.from_scores(ds.name, algorithm.name, configs[best], scores[best])
    return GridSearchResult(result, best, tuple(records), tuple(float(v) for v in means), failures)


# ---------------------------------------------------------------- rank statistics

@dataclass(frozen=True)
class RankTable:
    algorithms: tuple
    datasets: tuple
    ranks: np.ndarray
    average_ranks: np.ndarray


def average_ranks(scores, algorithms=None, datasets=None) -> RankTable:
    """Rank algorithms per dataset (1 = highest score, ties averaged)."""
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2:
        raise ValueError("scores must be an n_datasets x k_algorithms table")
    if np.any(np.isnan(S)):
        i, j = np.argwhere(np.isnan(S))[0]
        raise MissingEntry(f"missing score for dataset {i}, algorithm {j}")
    n, k = S.shape
    algorithms = tuple(algorithms) if algorithms is not None else tuple(f"a{j}" for j in range(k))
    datasets = tuple(datasets) if datasets is not None else tuple(f"d{i}" for i in range(n))
    R = np.vstack([rankdata(-row, method="average") for row in S])
    return RankTable(algorithms, datasets, R, R.mean(axis=0))


def friedman(avg_ranks, n: int, k: int | None = None) -> tuple[float, float]:
    """Friedman chi-square statistic and its Iman-Davenport F form."""
    r = np.asarray(avg_ranks, dtype=float)
    k = len(r) if k is None else k
    if n < 2 or k < 2:
        raise ValueError("need n >= 2 and k >= 2")
    tau = 12.0 * n / (k * (k + 1)) * (float(np.sum(r * r)) - k * (k + 1) ** 2 / 4.0)
    denom = n * (k - 1) - tau
    if denom == 0:
        raise DegenerateDenominator("n(k-1) equals the chi-square statistic")
    return tau, (n - 1) * tau / denom


def nemenyi_cd(q_alpha: float, k: int, n: int) -> float:
    return q_alpha * math.sqrt(k * (k + 1) / (6.0 * n))


# Two-tailed Nemenyi critical values (studentized range / sqrt 2), k = 2..10.
Q_ALPHA = {
    0.10: {2: 1.645, 3: 2.052, 4: 2.291, 5: 2.459, 6: 2.589, 7: 2.693, 8: 2.780, 9: 2.855, 10: 2.920},
    0.05: {2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164},
}

# Critical F_F values as printed for the three published comparisons.
F_CRITICAL_PUBLISHED = {(8, 25, 0.10): 1.93, (8, 13, 0.10): 2.20, (8, 9, 0.10): 2.47}


def q_alpha(k: int, alpha: float = 0.10) -> float:
    try:
        return Q_ALPHA[alpha][k]
    except KeyError:
        raise ValueError(f"no Nemenyi q value for alpha={alpha}, k={k}") from None


def f_critical(k: int, n: int, alpha: float = 0.10) -> tuple[float, str]:
    """Critical value of F_F and where it came from ('published' or 'F-quantile')."""
    key = (k, n, alpha)
    if key in F_CRITICAL_PUBLISHED:
        return F_CRITICAL_PUBLISHED[key], "published"
    return float(f_dist.ppf(1 - alpha, k - 1, (k - 1) * (n - 1))), "F-quantile"


@dataclass
class StatsReport:
    algorithms: tuple
    average_ranks: np.ndarray
    n: int
    alpha: float
    tau: float
    f_f: float
    f_crit: float
    f_source: str
    q: float
    cd: float
    pairs: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.algorithms)

    @property
    def reject(self) -> bool:
        return self.f_f > self.f_crit

    def render(self, rank_table: RankTable | None = None) -> str:
        k, n = self.k, self.n
        lines = []
        if rank_table is not None:
            w = max(len(d) for d in rank_table.datasets)
            lines.append(" " * w + "  " + " ".join(f"{a:>10}" for a in self.algorithms))
            for d, row in zip(rank_table.datasets, rank_table.ranks):
                lines.append(f"{d:<{w}}  " + " ".join(f"{v:>10.2f}" for v in row))
            lines.append("")
        lines.append("average ranks: " + ", ".join(
            f"{a}={r:.2f}" for a, r in zip(self.algorithms, self.average_ranks)))
        sq = " + ".join(f"{r:.2f}^2" for r in self.average_ranks)
        lines.append(f"tau_chi2 = 12*{n}/({k}*{k + 1}) * ({sq} - {k}*{k + 1}^2/4) = {self.tau:.2f}")
        lines.append(f"F_F = ({n}-1)*{self.tau:.2f} / ({n}*({k}-1) - {self.tau:.2f}) = {self.f_f:.2f}")
        verdict = "reject" if self.reject else "cannot reject"
        lines.append(f"critical F (alpha={self.alpha:g}, df=({k - 1}, {(k - 1) * (n - 1)}), "
                     f"{self.f_source}) = {self.f_crit:.2f} -> {verdict} equal performance "
                     f"[{'PASS' if self.reject else 'FAIL'}]")
        lines.append(f"CD = {self.q:.3f} * sqrt({k}*{k + 1}/(6*{n})) = {self.cd:.2f}")
        for a, b, diff, sig in self.pairs:
            lines.append(f"  {a} vs {b}: |diff| = {diff:.2f} "
                         f"{'>' if sig else '<='} CD -> {'significant' if sig else 'not significant'}")
        return "\n".join(lines)


def rank_statistics(avg_ranks, algorithms, n: int, alpha: float = 0.10) -> StatsReport:
    r = np.asarray(avg_ranks, dtype=float)
    k = len(r)
    tau, ff = friedman(r, n, k)
    fc, src = f_critical(k, n, alpha)
    q = q_alpha(k, alpha)
    cd = nemenyi_cd(q, k, n)
    pairs = []
    for i, j in itertools.combinations(range(k), 2):
        diff = abs(r[i] - r[j])
        pairs.append((algorithms[i], algorithms[j], diff, bool(diff > cd)))
    return StatsReport(tuple(algorithms), r, n, alpha, tau, ff, fc, src, q, cd, pairs)
