"""Command-line interface: simulate / fit / benchmark / mc / report.

Every flag can also be supplied through a JSON config file (`--config`);
explicit flags win. Exit codes: 0 success, 1 usage or input error, 2
estimation error. All randomness flows from explicit seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .benchmarks import SdidNotApplicable, fit_did2s, fit_sdid, fit_twfe
from .dgp import DgpConfig, simulate_dgp, write_truth
from .estimands import att_report, catt_reports_by_bins, gatt_reports
from .evalharness import load_adapter_csv, run_monte_carlo
from .model import DidBcfConfig, EstimationError, fit_didbcf
from .panel import (
    PanelFormatError,
    PanelSchema,
    PanelValidationError,
    load_panel,
    validate_panel,
    write_panel,
)

USAGE_ERROR = 1
ESTIMATION_ERROR = 2


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("DIDBCF_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> CliParser:
    parser = CliParser(prog="didbcf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_schema_flags(p):
        p.add_argument("--unit-col", default=None, help="unit id column (default unit)")
        p.add_argument("--time-col", default=None, help="period column (default time)")
        p.add_argument("--outcome-col", default=None, help="outcome column (default y)")
        p.add_argument("--adoption-col", default=None,
                       help="adoption-time column, 0 = never treated (default adoption)")
        p.add_argument("--covariate-cols", default=None,
                       help="comma-separated covariate columns (default none)")
        p.add_argument("--delimiter", default=None, help="CSV delimiter (default ,)")

    def add_common(p):
        p.add_argument("--config", default=None,
                       help="JSON config file; explicit flags win")

    p_sim = sub.add_parser("simulate", parents=[], help="generate one panel + truth")
    p_sim.add_argument("--dgp", type=int, default=None)
    p_sim.add_argument("--setting", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--units", type=int, default=None)
    p_sim.add_argument("--periods", type=int, default=None)
    p_sim.add_argument("--pre-periods", type=int, default=None)
    p_sim.add_argument("--sigma-eps", type=float, default=None)
    p_sim.add_argument("--tau-zero", action="store_true",
                       help="force the true effect to zero (placebo data)")
    p_sim.add_argument("--out", default=None, help="output directory")
    add_common(p_sim)

    p_fit = sub.add_parser("fit", help="fit the causal-forest model to a panel CSV")
    p_fit.add_argument("--input", default=None)
    add_schema_flags(p_fit)
    p_fit.add_argument("--draws", type=int, default=None,
                       help="total posterior iterations (default 2000)")
    p_fit.add_argument("--burnin", type=int, default=None, help="default 1000")
    p_fit.add_argument("--thin", type=int, default=None, help="default 1")
    p_fit.add_argument("--warm-sweeps", type=int, default=None, help="default 40")
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--gatt-by", choices=["k", "t"], default=None,
                       help="group summaries by event time (k) or period (t)")
    p_fit.add_argument("--catt-by", default=None,
                       help="covariate name for tertile-binned conditional effects")
    p_fit.add_argument("--out", default=None, help="report JSON path")
    p_fit.add_argument("--draws-out", default=None,
                       help="write per-cell effect draws as CSV")
    add_common(p_fit)

    p_bench = sub.add_parser("benchmark", help="run closed-form estimators on a panel CSV")
    p_bench.add_argument("--input", default=None)
    add_schema_flags(p_bench)
    p_bench.add_argument("--methods", default=None,
                         help="comma list from twfe,did2s,sdid (default all)")
    p_bench.add_argument("--out", default=None, help="report JSON path")
    add_common(p_bench)

    p_mc = sub.add_parser("mc", help="Monte Carlo study over one generator config")
    p_mc.add_argument("--dgp", type=int, default=None)
    p_mc.add_argument("--setting", type=int, default=None)
    p_mc.add_argument("--reps", type=int, default=None)
    p_mc.add_argument("--methods", default=None,
                      help="comma list from didbcf,twfe,did2s,sdid or adapter names")
    p_mc.add_argument("--units", type=int, default=None)
    p_mc.add_argument("--periods", type=int, default=None)
    p_mc.add_argument("--tau-zero", action="store_true")
    p_mc.add_argument("--draws", type=int, default=None)
    p_mc.add_argument("--burnin", type=int, default=None)
    p_mc.add_argument("--warm-sweeps", type=int, default=None)
    p_mc.add_argument("--jobs", type=int, default=None,
                      help="worker processes (default $DIDBCF_JOBS or 1)")
    p_mc.add_argument("--adapter", action="append", default=None,
                      metavar="NAME=CSV",
                      help="external estimator results to merge (repeatable)")
    p_mc.add_argument("--out", default=None, help="output directory")
    add_common(p_mc)

    p_rep = sub.add_parser("report", help="summarize saved effect draws")
    p_rep.add_argument("--input", default=None, help="panel CSV the fit used")
    add_schema_flags(p_rep)
    p_rep.add_argument("--draws", default=None, help="draws CSV from fit --draws-out")
    p_rep.add_argument("--gatt-by", choices=["k", "t"], default=None)
    p_rep.add_argument("--catt-by", default=None)
    p_rep.add_argument("--bins", type=int, default=None, help="default 3 (tertiles)")
    p_rep.add_argument("--out", default=None, help="report JSON path")
    add_common(p_rep)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Flag values override config-file values; both override defaults."""
    merged = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        merged.update(json.loads(path.read_text()))
    for key, value in vars(args).items():
        if key == "config":
            continue
        if value is not None and value is not False:
            merged[key.replace("_", "-")] = value
    return merged


def _schema_from(opts: dict) -> PanelSchema:
    cov = opts.get("covariate-cols", "")
    if isinstance(cov, str):
        covariates = tuple(c.strip() for c in cov.split(",") if c.strip())
    else:
        covariates = tuple(cov)
    return PanelSchema(
        unit=opts.get("unit-col", "unit"),
        time=opts.get("time-col", "time"),
        outcome=opts.get("outcome-col", "y"),
        adoption=opts.get("adoption-col", "adoption"),
        covariates=covariates,
    )


def _load_input_panel(opts: dict):
    path = opts.get("input")
    if not path:
        raise ValueError("--input is required")
    if not Path(path).exists():
        raise FileNotFoundError(f"input file not found: {path}")
    return load_panel(path, _schema_from(opts), delimiter=opts.get("delimiter", ","))


def _didbcf_config(opts: dict) -> DidBcfConfig:
    return DidBcfConfig(
        n_iterations=int(opts.get("draws", 2000)),
        n_burnin=int(opts.get("burnin", 1000)),
        thin=int(opts.get("thin", 1)),
        warm_start_sweeps=int(opts.get("warm-sweeps", 40)),
        seed=int(opts.get("seed", 0)),
    )


def cmd_simulate(opts: dict) -> int:
    config = DgpConfig(
        dgp_id=int(opts.get("dgp", 1)),
        setting=int(opts.get("setting", 1)),
        n_units=int(opts.get("units", 200)),
        n_periods=int(opts.get("periods", 8)),
        n_pre=int(opts.get("pre-periods", 4)),
        sigma_eps=float(opts.get("sigma-eps", 1.0)),
        tau_override=0.0 if opts.get("tau-zero") else None,
        seed=int(opts.get("seed", 1)),
    )
    out = Path(opts.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    panel, truth = simulate_dgp(config)
    write_panel(panel, out / "panel.csv")
    write_truth(truth, panel, out / "truth.csv")
    (out / "validation.json").write_text(validate_panel(panel).to_json())
    print(f"wrote {out / 'panel.csv'} ({panel.n_rows} rows), "
          f"{out / 'truth.csv'}, {out / 'validation.json'}")
    return 0


def _write_draws_csv(panel, draws, path) -> None:
    t_row = panel.calendar_time()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "unit", "time", "tau"])
        for s in range(draws.n_draws):
            for j, row in enumerate(draws.treated_rows):
                writer.writerow([s, panel.units[panel.unit_idx[row]],
                                 int(t_row[row]), repr(float(draws.tau[s, j]))])


def _fit_report(panel, draws, opts: dict) -> dict:
    report = {
        "n_draws": int(draws.n_draws),
        "n_treated_cells": int(draws.treated_rows.size),
        "att": att_report(draws).to_dict(),
        "gatt": [r.to_dict() for r in
                 gatt_reports(panel, draws, by=opts.get("gatt-by", "k"))],
    }
    if opts.get("catt-by"):
        report["catt"] = [r.to_dict() for r in catt_reports_by_bins(
            panel, draws, opts["catt-by"], n_bins=int(opts.get("bins", 3)))]
    return report


def cmd_fit(opts: dict) -> int:
    panel = _load_input_panel(opts)
    draws = fit_didbcf(panel, _didbcf_config(opts))
    report = _fit_report(panel, draws, opts)
    out = opts.get("out", "report.json")
    Path(out).write_text(json.dumps(report, indent=2))
    if opts.get("draws-out"):
        _write_draws_csv(panel, draws, opts["draws-out"])
    print(f"wrote {out}")
    return 0


def cmd_benchmark(opts: dict) -> int:
    panel = _load_input_panel(opts)
    methods = [m.strip() for m in opts.get("methods", "twfe,did2s,sdid").split(",")
               if m.strip()]
    report: dict = {}
    for method in methods:
        try:
            if method == "twfe":
                r = fit_twfe(panel)
                report["twfe"] = {
                    "event_times": r.event_times.tolist(),
                    "effects": r.effects.tolist(),
                    "se": r.se.tolist(),
                    "p_values": r.p_values.tolist(),
                    "overall": r.overall, "overall_se": r.overall_se,
                    "overall_p": r.overall_p,
                }
            elif method == "did2s":
                r = fit_did2s(panel)
                report["did2s"] = {
                    "groups": r.groups.tolist(),
                    "periods": r.periods.tolist(),
                    "effects": r.effects.tolist(),
                    "se": r.se.tolist(),
                    "p_values": r.p_values.tolist(),
                    "overall": r.overall, "overall_se": r.overall_se,
                    "overall_p": r.overall_p,
                }
            elif method == "sdid":
                r = fit_sdid(panel)
                report["sdid"] = {
                    "cohorts": r.cohorts.tolist(),
                    "effects": r.effects.tolist(),
                    "cell_counts": r.cell_counts.tolist(),
                    "overall": r.overall, "overall_se": r.overall_se,
                    "overall_p": r.overall_p,
                }
            else:
                raise ValueError(f"unknown benchmark method {method!r}")
        except (SdidNotApplicable, ValueError) as exc:
            if isinstance(exc, ValueError) and f"unknown benchmark" in str(exc):
                raise
            report[method] = {"error": str(exc)}
    out = opts.get("out", "report.json")
    Path(out).write_text(json.dumps(report, indent=2))
    print(f"wrote {out}")
    return 0


def cmd_mc(opts: dict) -> int:
    config = DgpConfig(
        dgp_id=int(opts.get("dgp", 1)),
        setting=int(opts.get("setting", 1)),
        n_units=int(opts.get("units", 200)),
        n_periods=int(opts.get("periods", 8)),
        tau_override=0.0 if opts.get("tau-zero") else None,
        seed=0,
    )
    methods = [m.strip() for m in opts.get("methods", "didbcf,twfe,did2s,sdid").split(",")
               if m.strip()]
    adapters = {}
    for spec in opts.get("adapter", []) or []:
        name, _, path = spec.partition("=")
        if not path:
            raise ValueError(f"--adapter expects NAME=CSV, got {spec!r}")
        adapters[name] = load_adapter_csv(path)
    out = Path(opts.get("out", "mc_out"))
    result = run_monte_carlo(
        config, methods, int(opts.get("reps", 10)),
        fit_config=_didbcf_config(opts),
        jobs=int(opts.get("jobs", _default_jobs())),
        out_dir=out,
        adapters=adapters or None,
    )
    failed = sum(1 for r in result.records if r.error)
    print(f"wrote {out}/per_rep.csv, aggregate.csv, rejection.csv, long.csv "
          f"({len(result.records)} records, {failed} failed)")
    return 0


def _read_draws_csv(panel, path):
    """Rebuild a PosteriorDraws-shaped object from a fit --draws-out file."""
    from .model import PosteriorDraws

    cell_of = {}
    t_row = panel.calendar_time()
    for i in range(panel.n_rows):
        cell_of[(str(panel.units[panel.unit_idx[i]]), int(t_row[i]))] = i
    by_draw: dict[int, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (row["unit"], int(row["time"]))
            if key not in cell_of:
                raise ValueError(f"draws reference unknown cell {key}")
            by_draw.setdefault(int(row["draw"]), {})[cell_of[key]] = float(row["tau"])
    draw_ids = sorted(by_draw)
    rows = sorted(by_draw[draw_ids[0]])
    tau = np.array([[by_draw[s][r] for r in rows] for s in draw_ids])
    n_draws = len(draw_ids)
    return PosteriorDraws(
        tau=tau, treated_rows=np.array(rows), sigma2=np.zeros(n_draws),
        a=np.zeros(n_draws), b0=np.zeros(n_draws), b1=np.zeros(n_draws),
        fitted_mean=np.zeros(n_draws), y_center=0.0, y_scale=1.0,
        n_rows=panel.n_rows)


def cmd_report(opts: dict) -> int:
    panel = _load_input_panel(opts)
    draws_path = opts.get("draws")
    if not draws_path:
        raise ValueError("--draws is required")
    if not Path(draws_path).exists():
        raise FileNotFoundError(f"draws file not found: {draws_path}")
    draws = _read_draws_csv(panel, draws_path)
    report = _fit_report(panel, draws, opts)
    out = opts.get("out", "report.json")
    Path(out).write_text(json.dumps(report, indent=2))
    print(f"wrote {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "benchmark": cmd_benchmark,
    "mc": cmd_mc,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        opts = _merge_config(args)
        return COMMANDS[args.command](opts)
    except (FileNotFoundError, PanelFormatError, PanelValidationError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ValueError as exc:
        # bad option values are usage errors; estimation failures are not
        if isinstance(exc, (EstimationError, SdidNotApplicable)):
            print(f"estimation error: {exc}", file=sys.stderr)
            return ESTIMATION_ERROR
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ArithmeticError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return ESTIMATION_ERROR


if __name__ == "__main__":
    sys.exit(main())
