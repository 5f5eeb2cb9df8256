"""Command-line interface.

Subcommands::

    compriskacc estimate --input data.csv --tau 3,4,5 --method proposed,ipcw-km
    compriskacc roc      --input data.csv --tau 5 --definition both --out rocs/
    compriskacc simulate --config table1_small.toml --out results/
    compriskacc truth    --event1 0.7 --censoring medium

Input CSV has the header ``time,status,score``; status 0 means censored and
1..K the cause of failure.

Exit codes: 0 success, 2 malformed input, 3 estimator failure,
4 bad simulation config.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from importlib import resources
from pathlib import Path

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .data import KernelSpec, check_horizon
from .errors import CompRiskError, DataError, InvalidConfig, InvalidKernelSpec
from .estimate import METHODS, compute_weights
from .inference import bootstrap_metrics
from .io import read_sample_csv, write_json, write_rows
from .metrics import accuracy_report, roc_curve
from .simulation import (
    CENSORING_TARGETS,
    MECHANISMS,
    METRICS,
    ScenarioConfig,
    run_scenario,
    scenario_setup,
)

log = logging.getLogger("compriskacc")

EXIT_INPUT = 2
EXIT_ESTIMATOR = 3
EXIT_CONFIG = 4

REPORT_COLUMNS = (
    "method", "tau", "definition", "auc", "auc_lower", "auc_upper",
    "brier", "brier_lower", "brier_upper", "kl", "kl_lower", "kl_upper",
    "abs_err", "abs_err_lower", "abs_err_upper", "n_undefined_weights", "kl_clipped",
)
ROC_COLUMNS = ("threshold", "false_positive_rate", "sensitivity", "specificity")


class ConfigError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return methods


def _definitions(choice: str) -> list[str]:
    return ["A", "B"] if choice == "both" else [choice]


def _kernel_spec(args) -> KernelSpec:
    if args.bandwidth is not None:
        return KernelSpec.with_bandwidth(args.bandwidth, args.kernel)
    return KernelSpec.with_span(args.span)


def _add_data_args(p):
    p.add_argument("--input", required=True, type=Path, help="CSV with header time,status,score")
    p.add_argument("--tau", required=True, type=_float_list, help="comma-separated horizons")
    p.add_argument("--method", type=_methods, default=["proposed"],
                   help="comma-separated subset of proposed,ipcw-km,ipcw-cox")
    p.add_argument("--definition", choices=["A", "B", "both"], default="both",
                   help="control definition: A includes competing events, B event-free only")
    p.add_argument("--span", type=float, default=0.05, help="neighbourhood fraction (default 0.05)")
    p.add_argument("--bandwidth", type=float, default=None, help="use a metric kernel with this bandwidth")
    p.add_argument("--kernel", choices=["epanechnikov", "gaussian", "uniform"], default="epanechnikov")
    p.add_argument("--n-causes", type=int, default=None, help="number of causes K (default: largest status, >= 2)")
    p.add_argument("--cause", type=int, default=1, help="cause of interest (default 1)")
    p.add_argument("--raw-marker", action="store_true",
                   help="scores are an arbitrary marker; calibration metrics are skipped")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compriskacc",
        description="Time-dependent ROC/AUC and prediction error for competing-risks data.",
        epilog="CSV status coding: 0 = censored, 1..K = cause of failure.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="AUC, Brier, KL and absolute error per horizon and method")
    _add_data_args(p)
    p.add_argument("--boot", type=int, default=0, help="bootstrap replicates (0 = no intervals)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("roc", help="ROC point files per method, horizon and definition")
    _add_data_args(p)

    p = sub.add_parser("simulate", help="run a simulation study from a TOML scenario file")
    p.add_argument("--config", required=True,
                   help="scenario TOML file, or the name of a bundled one (e.g. table1_small)")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--replicates", type=int, default=None, help="override the file's replicate count")
    p.add_argument("--seed", type=int, default=None, help="override the file's seed")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("truth", help="Monte Carlo true AUC_A, AUC_B and Brier for one cell")
    p.add_argument("--event1", type=float, default=0.70, choices=[0.30, 0.50, 0.70])
    p.add_argument("--censoring", choices=sorted(CENSORING_TARGETS), default="medium")
    p.add_argument("--mechanism", choices=MECHANISMS, default="independent")
    p.add_argument("--datasets", type=int, default=200)
    p.add_argument("--per-dataset", type=int, default=5000)
    p.add_argument("--seed", type=int, default=20190611)
    p.add_argument("--out", type=Path, default=None, help="write truth.json here")
    return parser


def _load_sample(args):
    return read_sample_csv(args.input, args.n_causes, args.cause, args.raw_marker)


def cmd_estimate(args) -> int:
    sample = _load_sample(args)
    spec = _kernel_spec(args)
    definitions = _definitions(args.definition)
    rows, reports = [], []
    undefined_total = 0
    for method in args.method:
        for tau in args.tau:
            tau = check_horizon(tau, sample)
            w = compute_weights(sample, tau, method, spec, allow_undefined=True)
            rep = accuracy_report(w, sample.score, method, sample.raw_marker, definitions)
            undefined_total += rep.n_undefined_weights
            boot = {}
            if args.boot:
                wanted = [f"auc_{d.lower()}" for d in definitions] + ["brier", "kl", "abs_err"]
                boot = bootstrap_metrics(sample, tau, spec, wanted, B=args.boot, alpha=args.alpha,
                                         seed=args.seed, method=method, workers=args.threads)
                rep.extra = {m: {"lower": b.lower, "upper": b.upper, "n_failed": b.n_failed}
                             for m, b in boot.items()}
            reports.append(rep.to_dict())
            for d in definitions:
                auc_key = "auc_a" if d == "A" else "auc_b"
                row = {
                    "method": method, "tau": tau, "definition": d, "auc": rep.auc(d),
                    "brier": rep.brier, "kl": rep.kl, "abs_err": rep.abs_err,
                    "n_undefined_weights": rep.n_undefined_weights, "kl_clipped": rep.kl_clipped,
                }
                for src, dst in ((auc_key, "auc"), ("brier", "brier"), ("kl", "kl"), ("abs_err", "abs_err")):
                    if src in boot:
                        row[f"{dst}_lower"] = boot[src].lower
                        row[f"{dst}_upper"] = boot[src].upper
                rows.append(row)
    args.out.mkdir(parents=True, exist_ok=True)
    write_rows(rows, REPORT_COLUMNS, args.out / "report.csv")
    write_json(
        {
            "input": str(args.input),
            "n": sample.n,
            "n_causes": sample.n_causes,
            "cause_of_interest": sample.cause_of_interest,
            "kernel": spec.describe(),
            "bootstrap": {"B": args.boot, "alpha": args.alpha, "seed": args.seed} if args.boot else None,
            "reports": reports,
        },
        args.out / "report.json",
    )
    if undefined_total:
        print(f"warning: {undefined_total} censored subject(s) had undefined case weights (set to 0); "
              "consider a wider span", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out / 'report.csv'}")
    return 0


def roc_filename(method: str, tau: float, definition: str) -> str:
    return f"roc_{method}_tau{tau:g}_{definition}.csv"


def cmd_roc(args) -> int:
    sample = _load_sample(args)
    spec = _kernel_spec(args)
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for method in args.method:
        for tau in args.tau:
            tau = check_horizon(tau, sample)
            w = compute_weights(sample, tau, method, spec, allow_undefined=True)
            for d in _definitions(args.definition):
                curve = roc_curve(w, sample.score, d)
                rows = [
                    {"threshold": c, "false_positive_rate": 1.0 - sp, "sensitivity": se, "specificity": sp}
                    for c, se, sp in curve.points
                ]
                path = args.out / roc_filename(method, tau, d)
                write_rows(rows, ROC_COLUMNS, path)
                written.append({"method": method, "tau": tau, "definition": d,
                                 "file": path.name, "auc_trapezoid": curve.auc_trapezoid})
    write_json(written, args.out / "roc_index.json")
    print(f"wrote {len(written)} ROC file(s) to {args.out}")
    return 0


def load_scenario_file(name_or_path: str) -> tuple[str, dict]:
    path = Path(name_or_path)
    if path.exists():
        text = path.read_text(encoding="utf-8")
        name = path.stem
    else:
        stem = name_or_path[:-5] if name_or_path.endswith(".toml") else name_or_path
        res = resources.files("compriskacc").joinpath("configs", f"{stem}.toml")
        if not res.is_file():
            raise ConfigError(f"no such scenario file: {name_or_path}")
        text = res.read_text(encoding="utf-8")
        name = stem
    try:
        return name, tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name_or_path}: {exc}") from None


SCENARIO_KEYS = {
    "name", "replicates", "seed", "methods", "mechanism", "event1_fractions", "censoring_levels",
    "sample_sizes", "spans", "bandwidth", "kernel", "n_oracle_datasets", "n_per_dataset",
}


def scenarios_from_config(cfg: dict, replicates=None, seed=None) -> tuple[list[ScenarioConfig], list[str]]:
    """Expand a scenario file into cells (event-1 x censoring x n x smoothing)."""
    unknown = set(cfg) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}")
    reps = replicates if replicates is not None else cfg.get("replicates", 200)
    seed = seed if seed is not None else cfg.get("seed", 1)
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError(f"replicates must be a positive integer, got {reps!r}")
    methods = cfg.get("methods", list(METHODS))
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {bad}")
    if "bandwidth" in cfg:
        specs = [KernelSpec.with_bandwidth(float(cfg["bandwidth"]), cfg.get("kernel", "epanechnikov"))]
    else:
        specs = [KernelSpec.with_span(float(s)) for s in cfg.get("spans", [0.05])]
    extra = {k: cfg[k] for k in ("n_oracle_datasets", "n_per_dataset") if k in cfg}
    cells = [
        ScenarioConfig(float(f), str(level), int(n), reps, spec, int(seed), cfg.get("mechanism", "independent"), **extra)
        for f, level, n, spec in itertools.product(
            cfg.get("event1_fractions", [0.70, 0.50, 0.30]),
            cfg.get("censoring_levels", ["medium", "high"]),
            cfg.get("sample_sizes", [300, 600]),
            specs,
        )
    ]
    return cells, list(methods)


def table_columns():
    cols = ["event1_fraction", "censoring", "mechanism", "n", "smoothing", "tau", "censored_fraction", "method"]
    for m in METRICS:
        cols += [f"truth_{m}", f"mean_{m}", f"bias_pct_{m}", f"mse_x1e3_{m}", f"mc_se_{m}"]
    cols += ["n_ok", "n_failed"]
    return cols


def cmd_simulate(args) -> int:
    try:
        name, cfg = load_scenario_file(args.config)
        cells, methods = scenarios_from_config(cfg, args.replicates, args.seed)
    except (ConfigError, InvalidConfig, InvalidKernelSpec, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    name = cfg.get("name", name)
    args.out.mkdir(parents=True, exist_ok=True)
    rows, results = [], []
    for cell in cells:
        try:
            res = run_scenario(cell, methods, workers=args.threads)
        except InvalidConfig as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        results.append(res.to_dict())
        for m in methods:
            row = {
                "event1_fraction": cell.event1_fraction, "censoring": cell.censoring_level,
                "mechanism": cell.mechanism, "n": cell.n, "smoothing": cell.spec.describe(),
                "tau": res.tau, "censored_fraction": res.mean_censoring_fraction, "method": m,
            }
            for metric in METRICS:
                s = res.get(m, metric)
                row.update({
                    f"truth_{metric}": s.truth, f"mean_{metric}": s.mean, f"bias_pct_{metric}": s.bias_pct,
                    f"mse_x1e3_{metric}": s.mse_x1e3, f"mc_se_{metric}": s.mc_se,
                })
                row["n_ok"], row["n_failed"] = s.n_ok, s.n_failed
            rows.append(row)
        auc = res.get(methods[0], "auc_a")
        print(f"{cell.label}: tau={res.tau:.3f} {methods[0]} AUC_A bias%={auc.bias_pct:+.3f} "
              f"MSEx1e3={auc.mse_x1e3:.3f}")
    write_rows(rows, table_columns(), args.out / f"{name}.csv")
    write_json({"name": name, "methods": methods, "cells": results}, args.out / f"{name}.json")
    print(f"wrote {len(rows)} rows to {args.out / (name + '.csv')}")
    return 0


def cmd_truth(args) -> int:
    setup = scenario_setup(args.event1, args.censoring, args.mechanism, None,
                           args.datasets, args.per_dataset, args.seed)
    out = {
        "event1_fraction": args.event1, "censoring": args.censoring, "mechanism": args.mechanism,
        "tau": setup.tau,
        "truth": {m: setup.truth.get(m) for m in METRICS},
        "mc_se": setup.truth.se,
    }
    for m in METRICS:
        print(f"{m}\t{setup.truth.get(m):.6f}\t(se {setup.truth.se[m]:.2e})")
    print(f"tau\t{setup.tau:.6f}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(out, args.out / "truth.json")
    return 0


COMMANDS = {"estimate": cmd_estimate, "roc": cmd_roc, "simulate": cmd_simulate, "truth": cmd_truth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("estimate", "roc"):
            _kernel_spec(args)
        return COMMANDS[args.command](args)
    except (DataError, InvalidKernelSpec, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CompRiskError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())
