"""Replicated runs, metric rows, CSV output and aggregation."""
import csv
import json
import logging
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy import stats

from ..baselines import run_ei, run_kg
from ..problems import GPSampledSpec
from ..sbo import SBOConfig, run_sbo
from .config import ExperimentConfig, build_problem

logger = logging.getLogger(__name__)

COLUMNS = ("algorithm", "replication", "iteration", "g_value", "norm_diff", "wall_ms", "status")
RUNNERS = {"sbo": run_sbo, "kg": run_kg, "ei": run_ei}
UNDEFINED = float("nan")    # normalized difference with a zero KG denominator
ZERO_TOL = 1e-12


def compute_normalized_difference(g_sbo, g_kg):
    """(g_sbo - g_kg) / |g_kg|, or the UNDEFINED sentinel when |g_kg| < 1e-12."""
    if abs(g_kg) < ZERO_TOL:
        return UNDEFINED
    return (g_sbo - g_kg) / abs(g_kg)


@dataclass
class MetricRow:
    algorithm: str
    replication: int
    iteration: int
    g_value: Optional[float]
    norm_diff: Optional[float] = None
    wall_ms: Optional[float] = None
    status: str = "ok"

    def cells(self):
        return [self.algorithm, str(self.replication), str(self.iteration), _fmt(self.g_value),
                _fmt(self.norm_diff), _fmt(self.wall_ms, 3), self.status]


def _fmt(v, digits=None):
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "undefined"
    return repr(float(v)) if digits is None else f"{v:.{digits}f}"


def _parse(s):
    if s == "":
        return None
    if s == "undefined":
        return UNDEFINED
    return float(s)


@lru_cache(maxsize=8)
def _problem(spec_json):
    return build_problem(json.loads(spec_json))


def run_replication(spec_json, algorithm, sbo_dict, replication):
    """One seeded run; returns (iteration, g_value, wall_ms) triples or an error string.

    Top-level so it can be shipped to worker processes.
    """
    try:
        problem = _problem(spec_json)
        record = RUNNERS[algorithm](problem, SBOConfig(**sbo_dict), replication)
        return [(r.iteration, r.g_value, r.wall_ms) for r in record.iterations], None
    except Exception as err:     # recorded as a failed row, never silently dropped
        logger.error("%s replication %d failed: %s", algorithm, replication, err)
        return None, f"{type(err).__name__}: {err}".replace("\n", " ") + "\n" + traceback.format_exc()


def _attach_norm_diff(rows):
    kg = {(r.replication, r.iteration): r.g_value for r in rows if r.algorithm == "kg" and r.status == "ok"}
    for r in rows:
        if r.algorithm != "sbo" or r.status != "ok" or r.g_value is None:
            continue
        g_kg = kg.get((r.replication, r.iteration))
        if g_kg is not None:
            r.norm_diff = compute_normalized_difference(r.g_value, g_kg)


def collect_rows(config, problem_spec=None, jobs=1):
    """Run every (algorithm, replication) of ``config``; returns (rows, failures)."""
    spec = problem_spec or config.problem
    spec_json = json.dumps(spec, sort_keys=True)
    sbo_dict = asdict(config.sbo)
    tasks = [(spec_json, a, sbo_dict, r) for a in config.algorithms for r in range(config.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_replication, *zip(*tasks)))
    else:
        results = [run_replication(*t) for t in tasks]

    rows, failures = [], []
    for (_, algorithm, _, rep), (traj, err) in zip(tasks, results):
        if err is not None:
            failures.append((algorithm, rep, err))
            rows.append(MetricRow(algorithm, rep, -1, None, status="failed: " + err.splitlines()[0]))
            continue
        for it, g, ms in traj:
            rows.append(MetricRow(algorithm, rep, it, g, wall_ms=ms if config.timing else None))
    _attach_norm_diff(rows)
    return rows, failures


def write_csv(rows, path):
    """Rows in a fixed column order; a single writer, sorted for reproducibility."""
    order = {a: i for i, a in enumerate(RUNNERS)}
    rows = sorted(rows, key=lambda r: (order.get(r.algorithm, 99), r.algorithm, r.replication, r.iteration))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(r.cells())


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [MetricRow(a, int(rep), int(it), _parse(g), _parse(nd), _parse(ms), st)
                for a, rep, it, g, nd, ms, st in reader]


@dataclass
class CurvePoint:
    algorithm: str
    iteration: int
    mean: float
    half_width: float    # 95% normal-approximation band
    count: int


def summarize(rows):
    """Mean G per (algorithm, iteration) over the successful replications."""
    groups = {}
    for r in rows:
        if r.status == "ok" and r.g_value is not None:
            groups.setdefault((r.algorithm, r.iteration), []).append(r.g_value)
    out = []
    for (a, it), vals in sorted(groups.items()):
        v = np.array(vals)
        hw = 1.96 * v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0
        out.append(CurvePoint(a, it, float(v.mean()), float(hw), int(v.size)))
    return out


def final_values(rows, algorithm):
    """G at the last iteration of each successful replication of ``algorithm``."""
    last = {}
    for r in rows:
        if r.algorithm == algorithm and r.status == "ok" and r.g_value is not None:
            if r.replication not in last or r.iteration > last[r.replication][0]:
                last[r.replication] = (r.iteration, r.g_value)
    return np.array([last[k][1] for k in sorted(last)])


def final_norm_diff(rows):
    """Defined normalized differences at the final iteration, one per replication."""
    final_it = max((r.iteration for r in rows if r.algorithm == "sbo" and r.status == "ok"), default=None)
    vals = [r.norm_diff for r in rows if r.algorithm == "sbo" and r.iteration == final_it
            and r.norm_diff is not None and not math.isnan(r.norm_diff)]
    return np.array(vals)


def mean_ci(values, level=0.95):
    """Mean and normal-approximation confidence interval."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return UNDEFINED, (UNDEFINED, UNDEFINED)
    m = float(v.mean())
    if v.size < 2:
        return m, (m, m)
    hw = stats.norm.ppf(0.5 + level / 2) * v.std(ddof=1) / np.sqrt(v.size)
    return m, (m - hw, m + hw)


@dataclass
class ExperimentResult:
    rows: List[MetricRow]
    failures: list
    csv_path: str
    plots: List[str]

    @property
    def ok(self):
        return not self.failures


def run_experiment(config: ExperimentConfig, jobs=1, plots=True, output=None):
    """Run, write ``metrics.csv`` and ``config.json``, and render the mean curves."""
    out = output or config.output
    os.makedirs(out, exist_ok=True)
    config.dump(os.path.join(out, "config.json"))
    rows, failures = collect_rows(config, jobs=jobs)
    csv_path = os.path.join(out, "metrics.csv")
    write_csv(rows, csv_path)
    images = []
    if plots:
        from .plotting import plot_curves
        images.append(plot_curves(summarize(rows), os.path.join(out, "curves.png"),
                                  title=config.problem.get("family", "")))
    return ExperimentResult(rows, failures, csv_path, images)


SWEEP_COLUMNS = ("point", "A_ratio", "log_beta", "mean_norm_diff", "ci_low", "ci_high", "count",
                 "mean_g_sbo", "mean_g_kg")


def run_sweep(config: ExperimentConfig, jobs=1, plots=True, output=None):
    """One experiment per sweep grid point, plus a summary CSV and line plot."""
    out = output or config.output
    os.makedirs(out, exist_ok=True)
    config.dump(os.path.join(out, "config.json"))
    summary, failures = [], []
    for k, spec in enumerate(config.sweep_points()):
        sub = os.path.join(out, f"point_{k:03d}")
        os.makedirs(sub, exist_ok=True)
        with open(os.path.join(sub, "problem.json"), "w") as fh:
            json.dump(spec, fh, indent=2, sort_keys=True)
        rows, fails = collect_rows(config, problem_spec=spec, jobs=jobs)
        write_csv(rows, os.path.join(sub, "metrics.csv"))
        failures.extend(fails)
        nd = final_norm_diff(rows)
        m, (lo, hi) = mean_ci(nd)
        beta = spec.get("beta")
        log_beta = spec["log_beta"] if "log_beta" in spec else (math.log(beta) if beta else UNDEFINED)
        summary.append({"point": k, "A_ratio": float(spec.get("A_ratio", GPSampledSpec.A_ratio)), "log_beta": log_beta,
                        "mean_norm_diff": m, "ci_low": lo, "ci_high": hi, "count": int(nd.size),
                        "mean_g_sbo": _mean_or_nan(final_values(rows, "sbo")),
                        "mean_g_kg": _mean_or_nan(final_values(rows, "kg"))})
    path = os.path.join(out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for s in summary:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in s.items()})
    images = []
    if plots:
        from .plotting import plot_sweep
        images.append(plot_sweep(summary, os.path.join(out, "sweep.png")))
    return summary, failures, path, images


def _mean_or_nan(v):
    return float(np.mean(v)) if len(v) else UNDEFINED
