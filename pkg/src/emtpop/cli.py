"""Command-line entry point.

Subcommands::

    emtpop run <preset | config.json>   one experiment into its own directory
    emtpop sweep <sweep.json>           a grid of experiments on worker threads
    emtpop reduce                       branch polynomials, reduced field, calibration
    emtpop bifurcate                    equilibrium table of the core model
    emtpop presets                      list preset names

Run directories live under ``$EMTPOP_OUTPUT_ROOT`` (default ``./runs``)
unless the config sets ``output_dir``.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bifurcation import bifurcation_table
from .config import PRESETS, ConfigError, ScenarioConfig, parse_config, preset, serialize_config
from .entropy import EntropyGrowthModel, run_entropy_model
from .integrate import IntegratorConfig
from .particles import write_field_csv
from .reduction import (
    CalibrationGrid,
    S_MAX,
    S_MIN,
    StabilityIntervals,
    build_reduced,
    calibrate_k,
    calibration_report_json,
    default_polynomials,
    export_lookup_csv,
)
from .regulatory import EpigeneticParams, with_alpha_epi
from .scenarios import (
    GrowthScenario,
    InitialCondition,
    hysteresis_metrics,
    run_epigenetic,
    run_hysteresis,
    run_population_scenario,
)

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "EMTPOP_OUTPUT_ROOT"

_TOLERANCES = {
    "population": (1e-4, 1e-6),
    "entropy": (1e-6, 1e-8),
    "hysteresis": (1e-8, 1e-6),
    "epigenetic": (1e-8, 1e-6),
}


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def run_directory(cfg: ScenarioConfig) -> Path:
    return Path(cfg.output_dir) if cfg.output_dir else output_root() / cfg.name


def _integrator(cfg: ScenarioConfig) -> IntegratorConfig:
    rtol, atol = _TOLERANCES[cfg.model]
    return IntegratorConfig(rtol=cfg.rtol or rtol, atol=cfg.atol or atol)


def _write_rows(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _run_population(cfg, out):
    run = run_population_scenario(
        InitialCondition(cfg.initial), GrowthScenario(cfg.growth, cfg.r_epi), s0=cfg.s0,
        alpha_relax=cfg.alpha_relax, eta_x=cfg.resolved_eta_x, eta_s=cfg.eta_s,
        horizon=cfg.horizon, cadence=cfg.cadence, n=cfg.resolved_n_grid, gamma=cfg.gamma,
        cfg=_integrator(cfg), deposit=cfg.deposit, joint_entropy=cfg.joint_entropy,
        death=cfg.death)
    write_field_csv(run.fields, out / "fields.csv", gamma=cfg.gamma)
    _write_rows(out / "series.csv", ["t_hours", "rho", "fE", "fH", "fM", "entropy"], run.series_rows())
    return run.summary()


def _run_entropy(cfg, out):
    model = EntropyGrowthModel(cfg.response, cfg.theta, cfg.r_epi, cfg.resolved_eta_x,
                               cfg.s0, cfg.capacity)
    checkpoints = np.arange(cfg.cadence, cfg.horizon + 0.5 * cfg.cadence, cfg.cadence)
    checkpoints[-1] = cfg.horizon
    run = run_entropy_model(cfg.initial, model, checkpoints, cfg.resolved_n_grid, cfg.gamma,
                            _integrator(cfg))
    write_field_csv(run.fields, out / "fields.csv", gamma=cfg.gamma)
    run.to_csv(out / "series.csv")
    return {"final_rho": float(run.rho[-1]), "final_entropy": float(run.entropy[-1])}


def _run_hysteresis(cfg, out):
    run = run_hysteresis(cfg.mode, cfg=_integrator(cfg))
    _write_rows(out / "series.csv", ["t_hours", "snail", "mu200", "zeb"],
                zip(run.times, run.snail, run.mu200, run.zeb))
    if run.histograms is not None:
        centers = 0.5 * (run.bins[1:] + run.bins[:-1])
        _write_rows(out / "fields.csv", ["t_hours", "mu200", "fraction"],
                    ((t, c, h) for t, row in zip(run.times, run.histograms) for c, h in zip(centers, row)))
    return hysteresis_metrics(run)


def _run_epigenetic(cfg, out):
    p = with_alpha_epi(EpigeneticParams(), cfg.alpha_epi)
    run = run_epigenetic(cfg.induction, p, recovery_fraction=cfg.recovery_fraction, cfg=_integrator(cfg))
    _write_rows(out / "series.csv", ["t_hours", "mu200", "zeb", "zeb_threshold"],
                zip(run.times, run.mu200, run.zeb, run.threshold_z0))
    return {"recovery_time_hours": run.recovery_time, "withdrawal_start_hours": run.withdrawal_start,
            "recovery_threshold": run.threshold}


_RUNNERS = {"population": _run_population, "entropy": _run_entropy,
            "hysteresis": _run_hysteresis, "epigenetic": _run_epigenetic}


def run_config(cfg: ScenarioConfig) -> dict:
    """Execute one config, write its directory and return the summary.

    Files written: ``config.json``, ``series.csv``, ``summary.json`` and,
    for runs with a density, ``fields.csv``.  Wall time is only printed,
    never written, so reruns produce identical files.
    """
    out = run_directory(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(serialize_config(cfg))
    summary = {"name": cfg.name, "model": cfg.model, **_RUNNERS[cfg.model](cfg, out)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _summary_line(summary: dict, wall: float) -> str:
    keys = ("final_rho", "final_entropy", "gap", "recovery_time_hours")
    parts = [f"{k}={summary[k]:.6g}" for k in keys if isinstance(summary.get(k), (int, float))]
    return f"{summary['name']}: {' '.join(parts)} wall={wall:.1f}s"


def _run_and_report(cfg: ScenarioConfig) -> int:
    t0 = time.perf_counter()
    try:
        summary = run_config(cfg)
    except Exception as exc:  # every failure becomes a structured report
        logger.debug("run %s failed", cfg.name, exc_info=True)
        report = {"run": cfg.name, "error": type(exc).__name__, "message": str(exc),
                  "traceback": traceback.format_exc(limit=3)}
        print(json.dumps(report), file=sys.stderr)
        return 1
    print(_summary_line(summary, time.perf_counter() - t0), flush=True)
    return 0


def _load(target: str) -> ScenarioConfig:
    if target in PRESETS:
        return preset(target)
    path = Path(target)
    if not path.exists():
        raise ConfigError(f"{target!r} is neither a preset nor a config file")
    return parse_config(path.read_text())


def cmd_run(args) -> int:
    cfg = _load(args.target)
    if args.output_dir:
        cfg = cfg.replace(output_dir=args.output_dir)
    return _run_and_report(cfg)


def expand_sweep(doc: dict) -> list[ScenarioConfig]:
    """Configs for the cartesian product of a sweep document's ``grid``.

    ``{"preset": ..., <fixed keys>, "grid": {key: [values, ...]}, "workers": n}``;
    run names get ``-key=value`` suffixes.
    """
    doc = dict(doc)
    doc.pop("workers", None)
    grid = doc.pop("grid", {})
    if not isinstance(grid, dict) or any(not isinstance(v, list) or not v for v in grid.values()):
        raise ConfigError("grid: must map keys to non-empty lists")
    base = parse_config(json.dumps(doc))
    configs = []
    for combo in itertools.product(*grid.values()):
        changes = dict(zip(grid, combo))
        suffix = "".join(f"-{k}={v}" for k, v in changes.items())
        configs.append(parse_config(json.dumps({**doc, **changes, "name": base.name + suffix})))
    return configs


def cmd_sweep(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    if not isinstance(doc, dict):
        raise ConfigError("sweep document must be a JSON object")
    workers = args.workers or int(doc.get("workers", 1))
    configs = expand_sweep(doc)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        codes = list(pool.map(_run_and_report, configs))
    failed = sum(c != 0 for c in codes)
    print(f"sweep: {len(configs) - failed}/{len(configs)} runs succeeded", flush=True)
    return 1 if failed else 0


def cmd_reduce(args) -> int:
    out = Path(args.output_dir) if args.output_dir else output_root() / "reduction"
    out.mkdir(parents=True, exist_ok=True)
    polys = default_polynomials()
    iv = StabilityIntervals()
    (out / "branches.json").write_text(json.dumps({
        "intervals": [list(i) for i in iv.as_list()],
        "polynomials": {r: {"coeffs": [float(c) for c in p.coeffs], "center": float(p.center),
                            "scale": float(p.scale), "domain": list(iv.branch_domain(r))}
                        for r, p in polys.items()},
    }, indent=2) + "\n")
    k = args.k
    if args.calibrate:
        grid = CalibrationGrid(n_t=50, n_s=10, n_x=10, n_z=10) if args.desk else CalibrationGrid()
        scores: dict = {}
        k = calibrate_k(args.candidates, horizon=args.horizon, grid=grid, report=scores)
        (out / "calibration.json").write_text(calibration_report_json(scores, args.horizon, k) + "\n")
        print(f"calibration: selected k={k!r} " + " ".join(f"{c}:{v:.6g}" for c, v in scores.items()))
    export_lookup_csv(build_reduced(polys, iv, k), out / "reduced_field.csv")
    print(f"reduce: wrote {out}")
    return 0


def cmd_bifurcate(args) -> int:
    s_values = np.linspace(args.s_min, args.s_max, args.n)
    rows = [(s, e.mu200, e.z, int(e.stable)) for s, eqs in bifurcation_table(s_values) for e in eqs]
    path = Path(args.output) if args.output else output_root() / "bifurcation.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(path, ["S", "mu200", "zeb", "stable"], rows)
    print(f"bifurcate: {len(rows)} equilibria at {len(s_values)} SNAIL levels -> {path}")
    return 0


def cmd_presets(args) -> int:
    for name, doc in PRESETS.items():
        print(f"{name:28s} " + " ".join(f"{k}={v}" for k, v in doc.items()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emtpop", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a preset or a JSON config file")
    p.add_argument("target")
    p.add_argument("-o", "--output-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the grid described by a JSON sweep file")
    p.add_argument("config")
    p.add_argument("-j", "--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reduce", help="export the reduced model, optionally recalibrating k")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--k", type=float, default=0.02)
    p.add_argument("--calibrate", action="store_true")
    p.add_argument("--desk", action="store_true", help="use the 10x10x10x50 calibration grid")
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--candidates", type=float, nargs="+", default=[0.005, 0.01, 0.02, 0.04, 0.08])
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("bifurcate", help="export equilibria over a SNAIL range")
    p.add_argument("--s-min", type=float, default=S_MIN)
    p.add_argument("--s-max", type=float, default=S_MAX)
    p.add_argument("-n", type=int, default=500)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bifurcate)

    p = sub.add_parser("presets", help="list preset names")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
