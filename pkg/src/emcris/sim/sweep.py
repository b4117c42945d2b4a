"""Monte Carlo sweeps over one scenario parameter, written as CSV."""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ScenarioConfig
from .scenario import Scenario
from .schemes import RunRecord, run_scheme

CSV_COLUMNS = (
    "scheme", "sweep_name", "sweep_value", "trial", "seed", "rate_surrogate_bits",
    "rate_mc_mean_bits", "rate_mc_se", "outer_iters", "pa_slack", "pmax_slack", "wall_ms",
)

DEFAULT_GRIDS = {
    "pmax": (20.0, 25.0, 30.0, 35.0, 40.0),
    "pj": (0.0, 5.0, 10.0, 15.0, 20.0),
    "pa": (-10.0, -5.0, 0.0, 5.0, 10.0),
    "m": (16.0, 36.0, 64.0),
    "ris-y": (20.0, 40.0, 60.0, 80.0, 100.0),
    "ds": (0.125, 0.25, 0.5),
}

SLACK_TOL = 1e-6


def sweep_grid(cfg: ScenarioConfig):
    """Sweep values in order; a single NaN point when not sweeping."""
    if cfg.sweep in ("none", "iters"):
        return (math.nan,)
    return tuple(cfg.sweep_grid) or DEFAULT_GRIDS[cfg.sweep]


def apply_point(cfg: ScenarioConfig, value) -> ScenarioConfig:
    """Config for one sweep point."""
    s = cfg.sweep
    if s in ("none", "iters"):
        return cfg
    if s == "pmax":
        return cfg.replace(P_max_dbm=value)
    if s == "pj":
        return cfg.replace(P_J_dbm=value)
    if s == "pa":
        return cfg.replace(P_A_dbm=value)
    if s == "ds":
        return cfg.replace(ds_frac=value)
    if s == "ris-y":
        x, _, z = cfg.ris_pos
        return cfg.replace(ris_pos=(x, float(value), z))
    if s == "m":
        side = int(round(math.sqrt(value)))
        if side * side != int(value):
            raise ValueError("M sweep values must be perfect squares")
        return cfg.replace(M_h=side, M_v=side)
    raise ValueError(f"unknown sweep {s!r}")


def _run_task(args):
    cfg, point, value, trial, keep_trace = args
    pcfg = apply_point(cfg, value)
    try:
        sc = Scenario(pcfg, trial)
    except (ValueError, np.linalg.LinAlgError):
        sc = None
    return [run_scheme(pcfg, s, value, trial, point, sc, keep_trace) for s in cfg.schemes]


def run_records(cfg: ScenarioConfig, jobs=1):
    """All RunRecords of a sweep, sorted by (scheme, point, trial)."""
    keep = cfg.sweep == "iters"
    tasks = [(cfg, p, v, t, keep) for p, v in enumerate(sweep_grid(cfg)) for t in range(cfg.trials)]
    if not cfg.schemes:
        return []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    order = {s: i for i, s in enumerate(cfg.schemes)}
    grid = sweep_grid(cfg)
    pos = {(i, t): (i, t) for i in range(len(grid)) for t in range(cfg.trials)}
    recs = []
    for (_, p, _, t, _), rs in zip(tasks, results):
        for r in rs:
            recs.append(((order[r.scheme],) + pos[(p, t)], r))
    recs.sort(key=lambda x: x[0])
    return [r for _, r in recs]


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def _row(scheme, sweep_name, value, trial, seed, sur, mc, se, iters, pa, pm, wall):
    return [scheme, sweep_name, "" if isinstance(value, float) and math.isnan(value) else _fmt(value),
            _fmt(trial), _fmt(seed), _fmt(sur), _fmt(mc), _fmt(se), _fmt(iters), _fmt(pa), _fmt(pm),
            _fmt(wall)]


def _summary(scheme, sweep_name, value, recs):
    ok = [r for r in recs if r.ok]
    n = len(ok)
    if n == 0:
        return _row(scheme, sweep_name, value, "summary", "", *([math.nan] * 6), 0.0)
    mc = np.array([r.rate_mc_mean_bits for r in ok])
    se = float(mc.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return _row(scheme, sweep_name, value, "summary", "",
                float(np.mean([r.rate_surrogate_bits for r in ok])), float(mc.mean()), se,
                float(np.mean([r.outer_iters for r in ok])),
                float(min(r.pa_slack for r in ok)), float(min(r.pmax_slack for r in ok)),
                float(sum(r.wall_ms for r in ok)))


def _iteration_rows(cfg, recs):
    """Per-iteration rows of the convergence sweep, carrying final values forward."""
    rows = []
    by_scheme = {}
    for r in recs:
        by_scheme.setdefault(r.scheme, []).append(r)
    for scheme in cfg.schemes:
        rs = by_scheme.get(scheme, [])
        last = max((len(r.trace) for r in rs if r.ok and r.trace), default=1)
        per_iter = [[] for _ in range(last)]
        for r in rs:
            if not r.ok or not r.trace:
                rows.append(_row(scheme, "iters", math.nan, r.trial, r.seed, *([math.nan] * 6), r.wall_ms))
                continue
            for i in range(last):
                tr = r.trace[min(i, len(r.trace) - 1)]
                final = i >= len(r.trace) - 1
                val = tr["rate_bits"]
                per_iter[i].append(val)
                rows.append(_row(scheme, "iters", float(i), r.trial, r.seed, val,
                                 r.rate_mc_mean_bits if final else math.nan,
                                 r.rate_mc_se if final else math.nan, min(i, len(r.trace) - 1),
                                 tr["pa_slack"] / cfg_budget(cfg, scheme, "pa"),
                                 tr["pmax_slack"] / cfg_budget(cfg, scheme, "pmax"), 0.0))
        for i, vals in enumerate(per_iter):
            if vals:
                v = np.array(vals)
                se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
                rows.append(_row(scheme, "iters", float(i), "summary", "", float(v.mean()), math.nan, se,
                                 float(i), math.nan, math.nan, 0.0))
    return rows


def cfg_budget(cfg, scheme, which):
    from .config import dbm_to_watt

    if which == "pa":
        return math.inf if scheme == "passive" else dbm_to_watt(cfg.P_A_dbm)
    extra = dbm_to_watt(cfg.P_A_dbm) if scheme == "passive" else 0.0
    return dbm_to_watt(cfg.P_max_dbm) + extra


def records_to_csv(cfg: ScenarioConfig, recs) -> str:
    """Render records plus per-(scheme, point) summary rows."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    if cfg.sweep == "iters":
        for row in _iteration_rows(cfg, recs):
            wr.writerow(row)
        return buf.getvalue()
    for r in recs:
        wr.writerow(_row(r.scheme, cfg.sweep, r.sweep_value, r.trial, r.seed, r.rate_surrogate_bits,
                         r.rate_mc_mean_bits, r.rate_mc_se, r.outer_iters, r.pa_slack, r.pmax_slack,
                         r.wall_ms))
    for scheme in cfg.schemes:
        for value in sweep_grid(cfg):
            group = [r for r in recs if r.scheme == scheme and
                     (r.sweep_value == value or (math.isnan(value) and math.isnan(r.sweep_value)))]
            wr.writerow(_summary(scheme, cfg.sweep, value, group))
    return buf.getvalue()


def check_invariants(recs):
    """List of human-readable invariant violations (empty when all hold)."""
    bad = []
    for r in recs:
        if not r.ok:
            continue
        tag = f"{r.scheme} value={r.sweep_value} trial={r.trial}"
        if not r.monotone:
            bad.append(f"{tag}: objective trace decreased")
        if r.pa_slack < -SLACK_TOL or r.pmax_slack < -SLACK_TOL:
            bad.append(f"{tag}: budget violated (pa {r.pa_slack:.3g}, pmax {r.pmax_slack:.3g})")
    return bad


def run_sweep(cfg: ScenarioConfig, jobs=1):
    """Run a sweep and return (csv_text, records, violations)."""
    recs = run_records(cfg, jobs)
    return records_to_csv(cfg, recs), recs, check_invariants(recs)
