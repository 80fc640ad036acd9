"""Monte Carlo driver: per-replication error metrics against simulated ground
truth, mean +- sd aggregation, and rejection frequencies.

Replication m uses seed m for both the generator and the model fit. Methods
that only estimate average effects are scored by broadcasting their finest
available estimate (per event time for the event-study regression, per
group-period cell for the two-stage estimator, per cohort for synthetic DiD)
to every treated cell's truth. External estimators can be merged in through
adapter CSVs with columns (rep, estimand_key, estimate, p_value).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .benchmarks import fit_did2s, fit_sdid, fit_twfe
from .dgp import DgpConfig, TruthRecord, simulate_dgp
from .estimands import bayes_test
from .model import DidBcfConfig, fit_didbcf
from .panel import PanelDataset

ALPHA = 0.05
KNOWN_METHODS = ("didbcf", "twfe", "did2s", "sdid")


@dataclass(frozen=True)
class Metrics:
    rmse: float
    mae: float
    mape: float | None   # None where any true effect is exactly zero


def compute_metrics(estimates, truth) -> Metrics:
    """RMSE, MAE, and MAPE over aligned treated-cell vectors.

    MAPE is undefined (None) when any true effect is zero. RMSE >= MAE always
    holds and is asserted.
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {tru.shape}")
    if est.size == 0:
        raise ValueError("empty metric vectors")
    err = est - tru
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    assert rmse + 1e-12 >= mae
    if np.any(tru == 0):
        mape = None
    else:
        mape = float(np.mean(np.abs(err) / np.abs(tru)))
    return Metrics(rmse=rmse, mae=mae, mape=mape)


def rejection_frequency(indicators) -> float:
    """Mean of 0/1 rejection indicators, ignoring missing entries."""
    arr = np.asarray(indicators, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one replication")
    ok = ~np.isnan(arr)
    if not ok.any():
        return math.nan
    return float(arr[ok].mean())


@dataclass
class RepRecord:
    rep: int
    method: str
    estimand_key: str = "att"
    rmse: float = math.nan
    mae: float = math.nan
    mape: float = math.nan
    p_value: float = math.nan
    reject: float = math.nan     # 1.0 / 0.0 / nan on failure
    error: str = ""


@dataclass
class McResult:
    records: list
    n_reps: int
    methods: list
    seeds: list

    def per_method(self, method: str) -> list:
        return [r for r in self.records if r.method == method]

    def aggregate(self) -> list[dict]:
        rows = []
        for method in self.methods:
            recs = self.per_method(method)
            ok = [r for r in recs if not r.error]
            row = {"method": method, "n_ok": len(ok),
                   "n_failed": len(recs) - len(ok)}
            for metric in ("rmse", "mae", "mape"):
                vals = np.array([getattr(r, metric) for r in ok], dtype=float)
                vals = vals[~np.isnan(vals)]
                row[f"{metric}_mean"] = float(vals.mean()) if vals.size else math.nan
                row[f"{metric}_sd"] = (float(vals.std(ddof=1))
                                       if vals.size > 1 else 0.0 if vals.size else math.nan)
            row["rejection_frequency"] = rejection_frequency(
                [r.reject for r in recs]) if recs else math.nan
            rows.append(row)
        return rows


def _treated_cell_keys(panel: PanelDataset):
    rows = np.flatnonzero(panel.treated())
    k, _ = panel.event_times()
    return rows, panel.row_adoption()[rows].astype(int), \
        panel.calendar_time()[rows].astype(int), k[rows].astype(int)


def score_didbcf(panel: PanelDataset, truth: TruthRecord,
                 config: DidBcfConfig) -> tuple[np.ndarray, float]:
    draws = fit_didbcf(panel, config)
    estimates = draws.tau.mean(axis=0)
    p = bayes_test(draws.tau.mean(axis=1))
    return estimates, p


def score_twfe(panel: PanelDataset) -> tuple[np.ndarray, float]:
    result = fit_twfe(panel)
    _, _, _, ks = _treated_cell_keys(panel)
    by_k = dict(zip(result.event_times.tolist(), result.effects.tolist()))
    estimates = np.array([by_k[k] for k in ks])
    return estimates, result.overall_p


def score_did2s(panel: PanelDataset) -> tuple[np.ndarray, float]:
    result = fit_did2s(panel)
    _, gs, ts, _ = _treated_cell_keys(panel)
    by_cell = {(g, t): e for g, t, e in
               zip(result.groups.tolist(), result.periods.tolist(),
                   result.effects.tolist())}
    estimates = np.array([by_cell[(g, t)] for g, t in zip(gs, ts)])
    return estimates, result.overall_p


def score_sdid(panel: PanelDataset) -> tuple[np.ndarray, float]:
    result = fit_sdid(panel)
    _, gs, _, _ = _treated_cell_keys(panel)
    by_g = dict(zip(result.cohorts.tolist(), result.effects.tolist()))
    estimates = np.array([by_g[g] for g in gs])
    return estimates, result.overall_p


def adapter_estimates(panel: PanelDataset, rows_for_rep: list) -> tuple[np.ndarray, float]:
    """Broadcast one replication's adapter rows to treated cells.

    Keys: "att" (all treated cells), "g=G", "g=G,t=T", or "k=K".
    """
    _, gs, ts, ks = _treated_cell_keys(panel)
    estimates = np.full(gs.size, math.nan)
    p_value = math.nan
    for key, est, p in rows_for_rep:
        key = key.strip()
        if key == "att":
            estimates[:] = est
            p_value = p
            continue
        mask = np.ones(gs.size, dtype=bool)
        for part in key.split(","):
            name, _, value = part.partition("=")
            name = name.strip()
            sel = {"g": gs, "t": ts, "k": ks}.get(name)
            if sel is None:
                raise ValueError(f"unknown adapter key component {name!r}")
            mask &= sel == int(value)
        estimates[mask] = est
    if np.isnan(estimates).any():
        raise ValueError("adapter rows do not cover every treated cell")
    return estimates, p_value


def load_adapter_csv(path) -> dict[int, list]:
    """Parse an external-estimator CSV into {rep: [(key, estimate, p), ...]}."""
    table: dict[int, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"rep", "estimand_key", "estimate", "p_value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"adapter CSV must have columns {sorted(required)}")
        for row in reader:
            rep = int(row["rep"])
            p_raw = row["p_value"].strip()
            table.setdefault(rep, []).append((
                row["estimand_key"],
                float(row["estimate"]),
                float(p_raw) if p_raw not in ("", "NA") else math.nan,
            ))
    return table


def run_replication(rep: int, dgp: DgpConfig, methods, fit_config: DidBcfConfig,
                    adapters: dict | None = None) -> list[RepRecord]:
    """Simulate with seed `rep` and score every method against the truth."""
    panel, truth = simulate_dgp(replace(dgp, seed=rep))
    treated_rows = np.flatnonzero(panel.treated())
    cell_truth = truth.tau[treated_rows]
    records = []
    for method in methods:
        record = RepRecord(rep=rep, method=method)
        try:
            if method == "didbcf":
                estimates, p = score_didbcf(panel, truth,
                                            replace(fit_config, seed=rep))
            elif method == "twfe":
                estimates, p = score_twfe(panel)
            elif method == "did2s":
                estimates, p = score_did2s(panel)
            elif method == "sdid":
                estimates, p = score_sdid(panel)
            elif adapters and method in adapters:
                rows = adapters[method].get(rep)
                if rows is None:
                    raise ValueError(f"adapter {method!r} has no rows for rep {rep}")
                estimates, p = adapter_estimates(panel, rows)
            else:
                raise ValueError(f"unknown method {method!r}")
            metrics = compute_metrics(estimates, cell_truth)
            record.rmse = metrics.rmse
            record.mae = metrics.mae
            record.mape = metrics.mape if metrics.mape is not None else math.nan
            record.p_value = p
            record.reject = float(p < ALPHA) if not math.isnan(p) else math.nan
        except Exception as exc:  # failed rep -> N/A row with a reason
            record.error = f"{type(exc).__name__}: {exc}"
        records.append(record)
    return records


def run_monte_carlo(dgp: DgpConfig, methods, n_reps: int,
                    fit_config: DidBcfConfig | None = None, jobs: int = 1,
                    out_dir=None, adapters: dict | None = None) -> McResult:
    """Replications m = 1..n_reps with seed m; optional process parallelism.

    Results are ordered by (rep, method) regardless of scheduling, so the
    output files are deterministic for a fixed configuration.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    if fit_config is None:
        fit_config = DidBcfConfig()
    methods = list(methods)
    reps = list(range(1, n_reps + 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(
                _replication_worker,
                [(rep, dgp, methods, fit_config, adapters) for rep in reps]))
    else:
        chunks = [run_replication(rep, dgp, methods, fit_config, adapters)
                  for rep in reps]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.rep, methods.index(r.method)))
    result = McResult(records=records, n_reps=n_reps, methods=methods, seeds=reps)
    if out_dir is not None:
        write_mc_outputs(result, out_dir)
    return result


def _replication_worker(args):
    rep, dgp, methods, fit_config, adapters = args
    return run_replication(rep, dgp, methods, fit_config, adapters)


def _fmt(value: float) -> str:
    return "NA" if value is None or (isinstance(value, float) and math.isnan(value)) \
        else repr(float(value))


def write_mc_outputs(result: McResult, out_dir) -> None:
    """Per-rep CSV, aggregate table, rejection frequencies, and a long-format
    file for plotting."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "per_rep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "method", "estimand_key", "rmse", "mae", "mape",
                         "p_value", "reject", "error"])
        for r in result.records:
            writer.writerow([r.rep, r.method, r.estimand_key, _fmt(r.rmse),
                             _fmt(r.mae), _fmt(r.mape), _fmt(r.p_value),
                             _fmt(r.reject), r.error])
    with open(out / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n_ok", "n_failed", "rmse_mean", "rmse_sd",
                         "mae_mean", "mae_sd", "mape_mean", "mape_sd",
                         "rejection_frequency"])
        for row in result.aggregate():
            writer.writerow([row["method"], row["n_ok"], row["n_failed"],
                             _fmt(row["rmse_mean"]), _fmt(row["rmse_sd"]),
                             _fmt(row["mae_mean"]), _fmt(row["mae_sd"]),
                             _fmt(row["mape_mean"]), _fmt(row["mape_sd"]),
                             _fmt(row["rejection_frequency"])])
    with open(out / "rejection.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "estimand_key", "n_reps", "rejection_frequency"])
        for row in result.aggregate():
            writer.writerow([row["method"], "att", result.n_reps,
                             _fmt(row["rejection_frequency"])])
    with open(out / "long.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "rep", "value"])
        for r in result.records:
            if r.error:
                continue
            for metric in ("rmse", "mae", "mape", "p_value", "reject"):
                writer.writerow([r.method, metric, r.rep,
                                 _fmt(getattr(r, metric))])
