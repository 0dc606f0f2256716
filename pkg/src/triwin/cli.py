"""Command-line entry point: ``triwin {bench,stats,irsweep,membership,sweep}``.

Exit codes: 0 success, 1 usage/config error, 2 some fold fits failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (DatasetManifest, LabeledDataset, format_ir, imbalance_ratio,
                      load_dataset, subsample_to_ir)
from .errors import TriwinError, UnachievableIR
from .evaluation import (ALGORITHM_NAMES, average_ranks, derive_seed, format_mean_std,
                         grid_axes, grid_search_cv, make_algorithm, rank_statistics)
from .kernel import KernelSpec, sigma2_heuristic
from .membership import three_way_table
from .models import DENOMINATORS

log = logging.getLogger("triwin")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
DEFAULT_IRS = (2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)

RESULTS_HEADER = ["dataset", "algorithm", "sigma2", "c13", "c24", "k_neighbors",
                  "fold", "se", "sp", "g_means"]
SUMMARY_HEADER = ["dataset", "algorithm", "mean", "std", "best_params"]


class ConfigError(Exception):
    pass


@dataclass
class BenchConfig:
    manifests: list
    algorithms: list
    folds: int = 10
    seed: int = 0
    grid: object = None
    output_dir: Path = Path(".")
    denominator: str = "class-block"
    workers: int | None = None
    axes: dict = field(init=False, repr=False)

    def __post_init__(self):
        if not self.manifests:
            raise ConfigError("at least one manifest is required")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        bad = [a for a in self.algorithms if a not in ALGORITHM_NAMES]
        if bad:
            raise ConfigError(f"unknown algorithm(s) {', '.join(bad)}; "
                              f"valid names: {', '.join(ALGORITHM_NAMES)}")
        if self.folds < 2:
            raise ConfigError("--folds must be >= 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        if self.denominator not in DENOMINATORS:
            raise ConfigError(f"--denominator must be one of {', '.join(DENOMINATORS)}")
        try:
            self.axes = grid_axes(self.grid)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad --grid: {exc}") from None
        self.output_dir = Path(self.output_dir)


# ---------------------------------------------------------------- formatting

def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _params_json(cfg: dict) -> str:
    return json.dumps({k: v for k, v in cfg.items() if v is not None}, sort_keys=True)


def _result_row(dataset: str, algorithm: str, rec) -> list:
    cfg = rec.config
    c13 = cfg.get("c13", cfg.get("C"))
    return [dataset, algorithm,
            "heuristic" if cfg.get("sigma2") is None else _num(cfg["sigma2"]),
            _num(c13), _num(cfg.get("c24")), _num(cfg.get("k")),
            str(rec.fold), f"{rec.se:.6f}", f"{rec.sp:.6f}", f"{rec.g_means:.6f}"]


def _write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _load_manifest(path) -> tuple[DatasetManifest, LabeledDataset]:
    try:
        manifest = DatasetManifest.from_json(path)
        return manifest, load_dataset(manifest)
    except (OSError, json.JSONDecodeError, KeyError, TriwinError, ValueError) as exc:
        raise ConfigError(f"cannot load manifest {path}: {exc}") from None


# ---------------------------------------------------------------- bench

@dataclass
class _Run:
    results: list
    summary: list
    failures: int


def _bench_dataset(ds: LabeledDataset, cfg: BenchConfig, seed_key: str | None = None) -> _Run:
    results, summary, failures = [], [], 0
    for name in cfg.algorithms:
        alg = make_algorithm(name, cfg.denominator)
        gs = grid_search_cv(ds, alg, cfg.axes, cfg.folds, cfg.seed,
                            workers=cfg.workers, seed_key=seed_key)
        failures += gs.failures
        results.extend(_result_row(ds.name, name, r) for r in gs.records)
        b = gs.best
        summary.append([ds.name, name, f"{b.mean:.6f}", f"{b.std:.6f}", _params_json(b.params)])
        log.info("%s %s: %s %s", ds.name, name, b.formatted(), _params_json(b.params))
    return _Run(results, summary, failures)


def cmd_bench(cfg: BenchConfig) -> int:
    datasets = [_load_manifest(p)[1] for p in cfg.manifests]
    results, summary, failures = [], [], 0
    for ds in datasets:
        run = _bench_dataset(ds, cfg)
        results += run.results
        summary += run.summary
        failures += run.failures
    _write_csv(cfg.output_dir / "results.csv", RESULTS_HEADER, results)
    _write_csv(cfg.output_dir / "summary.csv", SUMMARY_HEADER, summary)
    if failures:
        log.warning("%d fold fit(s) failed and were scored 0", failures)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------- stats

def _read_summary(path) -> tuple[list, list, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"dataset", "algorithm", "mean"} <= set(rows[0]):
        raise ConfigError(f"{path}: expected columns dataset, algorithm, mean")
    datasets = list(dict.fromkeys(r["dataset"] for r in rows))
    algorithms = list(dict.fromkeys(r["algorithm"] for r in rows))
    S = np.full((len(datasets), len(algorithms)), np.nan)
    for r in rows:
        try:
            S[datasets.index(r["dataset"]), algorithms.index(r["algorithm"])] = float(r["mean"])
        except ValueError:
            pass
    missing = [f"{datasets[i]}/{algorithms[j]}" for i, j in np.argwhere(np.isnan(S))]
    if missing:
        raise ConfigError(f"summary has missing cells: {', '.join(missing)}")
    return datasets, algorithms, S


def cmd_stats(summary=None, alpha: float = 0.10, ranks=None, n=None, names=None,
              out=None) -> int:
    if ranks is not None:
        if n is None:
            raise ConfigError("rank-input mode needs --n")
        names = list(names) if names else [f"A{i + 1}" for i in range(len(ranks))]
        if len(names) != len(ranks):
            raise ConfigError("--names must match --ranks in length")
        table = None
        avg = np.asarray(ranks, dtype=float)
    else:
        if summary is None:
            raise ConfigError("give a summary CSV or --ranks")
        datasets, names, S = _read_summary(summary)
        table = average_ranks(S, names, datasets)
        avg, n = table.average_ranks, len(datasets)
    try:
        report = rank_statistics(avg, names, n, alpha)
    except (ValueError, TriwinError) as exc:
        raise ConfigError(str(exc)) from None
    print(report.render(table), file=out or sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------- irsweep

def _ir_label(ir: float) -> str:
    return f"{ir:g}"


def cmd_irsweep(cfg: BenchConfig, irs=DEFAULT_IRS) -> int:
    """Benchmark each manifest at several imbalance ratios.

    Derived datasets are written next to the summaries; folds and config
    seeds are keyed on the source dataset name so the original IR row
    reproduces a plain bench.
    """
    summary, plot, failures = [], [], 0
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    for path in cfg.manifests:
        _, base = _load_manifest(path)
        log.info("%s: IR %s", base.name, format_ir(imbalance_ratio(base)))
        for ir in irs:
            try:
                derived = subsample_to_ir(base, ir, derive_seed(cfg.seed, base.name, "ir", float(ir)))
            except UnachievableIR as exc:
                log.warning("%s: skipping IR %s (%s)", base.name, _ir_label(ir), exc)
                continue
            derived = derived.subset(np.arange(derived.m), f"{base.name}_ir{_ir_label(ir)}")
            derived.to_csv(cfg.output_dir / f"{derived.name}.csv")
            run = _bench_dataset(derived, cfg, seed_key=base.name)
            failures += run.failures
            for row in run.summary:
                summary.append([_ir_label(ir)] + row)
                plot.append([_ir_label(ir), row[1], row[2]])
    _write_csv(cfg.output_dir / "irsweep_summary.csv", ["ir"] + SUMMARY_HEADER, summary)
    _write_csv(cfg.output_dir / "irsweep_plot.csv", ["ir", "algorithm", "mean_gmeans"], plot)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- membership

MEMBERSHIP_HEADER = ["sample_index", "label", "entropy", "region", "twf", "kf", "membership"]


def _kernel_from_flags(kind: str, sigma2, X) -> KernelSpec:
    if kind == "linear":
        return KernelSpec.linear()
    if sigma2 in (None, "heuristic"):
        return KernelSpec.rbf(sigma2_heuristic(X))
    return KernelSpec.rbf(float(sigma2))


def membership_rows(ds: LabeledDataset, k: int, spec: KernelSpec) -> list:
    t = three_way_table(ds, k, spec)
    return [[str(i), str(int(t.labels[i])), f"{t.entropy[i]:.6f}", t.region[i],
             f"{t.twf[i]:.6f}", f"{t.kf[i]:.6f}", f"{t.membership[i]:.6f}"]
            for i in range(ds.m)]


def cmd_membership(manifest, k: int, kernel: str = "rbf", sigma2=None, out=None) -> int:
    _, ds = _load_manifest(manifest)
    try:
        rows = membership_rows(ds, k, _kernel_from_flags(kernel, sigma2, ds.features))
    except (TriwinError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(MEMBERSHIP_HEADER)
        w.writerows(rows)
    else:
        _write_csv(Path(out), MEMBERSHIP_HEADER, rows)
    return EXIT_OK


# ---------------------------------------------------------------- sweep

SWEEP_PARAMS = ("k", "c13", "c24", "sigma2")


def cmd_sweep(cfg: BenchConfig, param: str = "k") -> int:
    """Best twftsvm G-Means for each value of one parameter (others maximised)."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    rows, failures = [], 0
    for path in cfg.manifests:
        _, ds = _load_manifest(path)
        alg = make_algorithm("twftsvm", cfg.denominator)
        configs = alg.grid(cfg.axes)
        gs = grid_search_cv(ds, alg, configs, cfg.folds, cfg.seed, workers=cfg.workers)
        failures += gs.failures
        best: dict = {}
        for ci, c in enumerate(configs):
            v = c[param]
            if v not in best or gs.config_means[ci] > gs.config_means[best[v]]:
                best[v] = ci
        for v, ci in best.items():
            fold_scores = [r.g_means for r in gs.records if r.config_index == ci]
            rows.append([ds.name, param, "heuristic" if v is None else _num(v),
                         f"{gs.config_means[ci]:.6f}", format_mean_std(fold_scores),
                         _params_json(configs[ci])])
    _write_csv(cfg.output_dir / f"sweep_{param}.csv",
               ["dataset", "param", "value", "mean_gmeans", "formatted", "best_params"], rows)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- argparse

def _grid_arg(args):
    grid = args.grid
    if getattr(args, "sigma2_mode", "grid") == "heuristic":
        axes = json.loads(grid) if grid and grid.strip().startswith("{") else {"base": grid or "full"}
        axes["sigma2"] = ["heuristic"]
        grid = json.dumps(axes)
    return grid


def _bench_config(args) -> BenchConfig:
    return BenchConfig(manifests=list(args.manifests), algorithms=list(args.algorithms),
                       folds=args.folds, seed=args.seed, grid=_grid_arg(args),
                       output_dir=Path(args.out), denominator=args.denominator)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for partial fold failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p = _Parser(prog="triwin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment(sp, algorithms=True):
        sp.add_argument("--manifests", nargs="+", required=True, help="dataset manifest JSON files")
        if algorithms:
            sp.add_argument("--algorithms", nargs="+", default=list(ALGORITHM_NAMES),
                            help=f"subset of: {', '.join(ALGORITHM_NAMES)}")
        sp.add_argument("--folds", type=int, default=10)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--grid", default="full",
                        help="named grid (full, quick) or JSON axis overrides")
        sp.add_argument("--sigma2-mode", choices=("grid", "heuristic"), default="grid",
                        help="search sigma2 over the grid or use the distance heuristic")
        sp.add_argument("--denominator", choices=DENOMINATORS, default="class-block")
        sp.add_argument("--out", default=".", help="output directory")

    experiment(sub.add_parser("bench", parents=[common],
                              help="cross-validated grid search, writes results/summary CSV"))

    sp = sub.add_parser("stats", parents=[common], help="Friedman test and Nemenyi critical difference")
    sp.add_argument("summary", nargs="?", help="summary.csv from bench")
    sp.add_argument("--alpha", type=float, default=0.10)
    sp.add_argument("--ranks", type=float, nargs="+", help="average ranks (skips the summary)")
    sp.add_argument("--n", type=int, help="number of datasets behind --ranks")
    sp.add_argument("--names", nargs="+", help="algorithm names for --ranks")

    sp = sub.add_parser("irsweep", parents=[common], help="bench at several imbalance ratios")
    experiment(sp)
    sp.add_argument("--irs", type=float, nargs="+", default=list(DEFAULT_IRS))

    sp = sub.add_parser("membership", parents=[common], help="three-way membership table as CSV")
    sp.add_argument("manifest")
    sp.add_argument("--k", type=int, default=11)
    sp.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    sp.add_argument("--sigma2", default="heuristic", help="RBF width or 'heuristic'")
    sp.add_argument("--out", help="CSV path (stdout if omitted)")

    sp = sub.add_parser("sweep", parents=[common], help="twftsvm parameter sensitivity")
    experiment(sp, algorithms=False)
    sp.add_argument("--param", choices=SWEEP_PARAMS, default="k")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            return cmd_bench(_bench_config(args))
        if args.command == "stats":
            return cmd_stats(args.summary, args.alpha, args.ranks, args.n, args.names)
        if args.command == "irsweep":
            return cmd_irsweep(_bench_config(args), args.irs)
        if args.command == "membership":
            return cmd_membership(args.manifest, args.k, args.kernel, args.sigma2, args.out)
        args.algorithms = ["twftsvm"]
        return cmd_sweep(_bench_config(args), args.param)
    except ConfigError as exc:
        print(f"triwin: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"triwin: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
