"""Command-line experiment runner.

Subcommands::

    dualcontrol bounds  --config PATH [--out DIR] [--mode MODE] [--seed U64] [--jobs N]
    dualcontrol figures --config PATH [--out DIR]
    dualcontrol paths   --config PATH [--out DIR]

The output directory is taken from ``--out``, else the ``DUALCONTROL_OUT``
environment variable, else the ``outputs`` key of the config.

Exit codes: 0 success, 2 invalid configuration, 3 at least one cell failed.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import MODES, ExperimentConfig, load_config
from .diagnostics import (
    CSV_HEADER,
    KDE_PAD,
    BoundsReport,
    allocation_curve,
    annual_loss,
    compensating_variation,
    duality_gap,
    fmt,
    kde,
)
from .dual import solve_dual, upper_bound
from .errors import ConfigError, DualControlError
from .market import simulate_states
from .preferences import DualCrraPrefs, utility
from .primal import WealthSample, lower_bound, optimize_primal, simulate_wealth

log = logging.getLogger("dualcontrol")

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 2, 3
OUT_ENV = "DUALCONTROL_OUT"
KDE_BANDWIDTH = 0.15


@dataclass
class CellResult:
    prefs: DualCrraPrefs
    horizon: float
    report: BoundsReport | None = None
    sample: WealthSample | None = None
    error: str | None = None


def run_cell(cfg: ExperimentConfig, prefs: DualCrraPrefs, horizon: float,
             retain: bool = False) -> CellResult:
    """Solve the dual, simulate, and evaluate bounds for one cell."""
    market, sim = cfg.market, cfg.sim_for(horizon)
    try:
        sol = solve_dual(market, prefs, sim.x0, horizon)
        dual = sol.controls
        ub = upper_bound(dual, market, prefs, sim.x0, horizon)
        paths = simulate_states(market, sim, dual.lambda_u_hat, workers=cfg.workers)
        primal = dual.as_side("primal")
        if cfg.mode == "optimize-primal":
            primal = optimize_primal(paths, market, prefs, sim.x0, dual, max_evals=cfg.max_evals).controls
        sample = simulate_wealth(paths, primal, market, prefs, sim.x0, retain=retain)
        lb = lower_bound(sample, prefs)
        gap = duality_gap(lb, ub)
        cv = compensating_variation(sample, prefs, ub)
        report = BoundsReport(
            profile=prefs.label,
            horizon=horizon,
            lower=lb,
            upper=ub,
            gap=gap,
            cv=cv,
            al_bp=annual_loss(cv, sim.x0, horizon),
            controls_primal=primal,
            controls_dual=dual,
        )
    except DualControlError as exc:
        log.error("cell %s T=%g failed: %s", prefs.label, horizon, exc)
        return CellResult(prefs, horizon, error=f"{type(exc).__name__}: {exc}")
    if not report.weak_duality_ok:
        log.warning("cell %s T=%g violates weak duality beyond 2 standard errors", prefs.label, horizon)
    return CellResult(prefs, horizon, report, sample)


def _cell_job(args):
    cfg, prefs, horizon, retain = args
    return run_cell(cfg, prefs, horizon, retain)


def run_bounds(cfg: ExperimentConfig, jobs: int = 1, retain: bool = False) -> list[CellResult]:
    """All (horizon, profile) cells in row order."""
    tasks = [(cfg, p, T, retain) for T in cfg.horizons for p in cfg.profiles]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_cell_job, tasks))
    return [_cell_job(t) for t in tasks]


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _tag(prefs: DualCrraPrefs) -> str:
    return f"{prefs.gamma_d:g}_{prefs.gamma_u:g}"


def write_bounds(results: list[CellResult], out: Path) -> None:
    rows, flags = [], []
    for res in results:
        if res.report is None:
            rows.append([res.prefs.label, fmt(res.horizon)] + ["nan"] * (len(CSV_HEADER) - 2))
            flags.append([res.prefs.label, fmt(res.horizon), "failed", res.error])
        else:
            rows.append(res.report.row())
            status = "ok" if res.report.weak_duality_ok else "weak_duality_violation"
            flags.append([res.prefs.label, fmt(res.horizon), status, ""])
    _write(out / "bounds.csv", CSV_HEADER, rows)
    _write(out / "bounds_flags.csv", ("profile", "T", "status", "detail"), flags)


def write_trajectories(res: CellResult, out: Path) -> None:
    s = res.sample
    grid = np.linspace(0.0, res.horizon, s.weights.shape[1] + 1)
    rows = []
    for j in range(s.weights.shape[0]):
        for k in range(s.weights.shape[1]):
            wt = s.weights[j, k]
            rows.append([str(j), fmt(grid[k]), fmt(wt[0]), fmt(wt[1]), fmt(wt[2]),
                         fmt(np.exp(s.log_wealth[j, k]))])
    _write(out / f"trajectories_{_tag(res.prefs)}_T{res.horizon:g}.csv",
           ("path", "time", "weight_stock", "weight_bond1", "weight_bond2", "wealth"), rows)


def run_figures(cfg: ExperimentConfig, out: Path) -> list[CellResult]:
    """Utility curves, reduced-economy allocation curves and wealth densities."""
    names = [_tag(p) for p in cfg.profiles]

    x = np.linspace(0.05, 3.0, 296)
    cols = [utility(x, 1.0, p) for p in cfg.profiles]
    _write(out / "figure1_utility.csv", ["x"] + [f"u_{n}" for n in names],
           [[fmt(v)] + [fmt(c[i]) for c in cols] for i, v in enumerate(x)])

    w = np.geomspace(1e-4, 1e4, 401)
    cols = [allocation_curve(p, w) for p in cfg.profiles]
    _write(out / "figure2_allocation.csv", ["wealth"] + [f"weight_{n}" for n in names],
           [[fmt(v)] + [fmt(c[i]) for c in cols] for i, v in enumerate(w)])

    horizon = cfg.horizons[0]
    results = [run_cell(cfg, p, horizon) for p in cfg.profiles]
    samples = [r.sample.real_wealth for r in results if r.sample is not None]
    if samples:
        lo = min(s.min() for s in samples) - KDE_PAD * KDE_BANDWIDTH
        hi = max(s.max() for s in samples) + KDE_PAD * KDE_BANDWIDTH
        grid = np.linspace(lo, hi, 512)
        dens = [kde(s, KDE_BANDWIDTH, grid=grid)[1] for s in samples]
        ok = [n for n, r in zip(names, results) if r.sample is not None]
        _write(out / "figure3_density.csv", ["real_wealth"] + [f"density_{n}" for n in ok],
               [[fmt(v)] + [fmt(d[i]) for d in dens] for i, v in enumerate(grid)])
    return results


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualcontrol", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")

    b = sub.add_parser("bounds", help="lower/upper bounds, gap, CV and AL per cell")
    common(b)
    b.add_argument("--mode", choices=MODES, help="primal controls: dual-injected or optimised")
    b.add_argument("--seed", type=int, help="master RNG seed (unsigned 64-bit)")
    b.add_argument("--jobs", type=int, default=1, help="run cells in parallel processes")
    b.add_argument("--trajectories", action="store_true", help="also export weight trajectories")

    common(sub.add_parser("figures", help="CSV data for the utility, allocation and density plots"))
    common(sub.add_parser("paths", help="export simulated state paths for the first horizon"))
    return ap


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "bounds":
            over = {}
            if args.mode:
                over["mode"] = args.mode
            if args.seed is not None:
                over["seed"] = args.seed
            cfg = cfg.with_overrides(**over)
            if args.jobs < 1:
                raise ConfigError("--jobs must be positive")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(args, cfg)

    if args.command == "bounds":
        results = run_bounds(cfg, jobs=args.jobs, retain=args.trajectories)
        write_bounds(results, out)
        if args.trajectories:
            for res in results:
                if res.sample is not None:
                    write_trajectories(res, out)
    elif args.command == "figures":
        results = run_figures(cfg, out)
    else:
        paths = simulate_states(cfg.market, cfg.sim_for(cfg.horizons[0]), workers=cfg.workers)
        paths.to_csv(out / "paths.csv")
        results = []
    return EXIT_FAILED if any(r.error for r in results) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
