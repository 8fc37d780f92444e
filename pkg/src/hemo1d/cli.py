"""Command-line interface: ``hemo1d run|check|analyze|scale-flows``."""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import logging
import platform
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import analyze, exercise_transform, heart_rate, write_wia_csv
from .config import ConfigError, RunConfig, apply_parameters, config_from_dict, parse_config, validate_ids
from .flows import FlowScalingError, load_flow_set, scale_measured_flows
from .network import NetworkError, assign_gravity_angles, load_network
from .presets import REGIONS
from .results_io import read_series, write_run_summary, write_series
from .solver import SimulationError, resolve_grid, run_simulation, tree_spec_for, tree_spectra
from .structured_tree import TreeDepthError
from .wall import MMHG
from .waveform import WaveformError, load_waveform

log = logging.getLogger("hemo1d")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
VALIDATION_ERRORS = (ConfigError, NetworkError, WaveformError, FlowScalingError,
                     FileNotFoundError, TreeDepthError, ValueError, KeyError)


def prepare(cfg: RunConfig):
    """Network, inflow and tree specs for a config, with scenario transforms applied."""
    net = apply_parameters(load_network(cfg.network), cfg)
    validate_ids(cfg, net)
    net = assign_gravity_angles(net, cfg.posture)
    if cfg.inflow is None:
        raise ConfigError("config.inflow: required for a run")
    inflow = load_waveform(cfg.inflow)
    if cfg.exercise.enabled:
        inflow = exercise_transform(inflow, cfg.exercise.flow_factor, cfg.exercise.period_factor)
    p = cfg.parameters
    trees = {vid: tree_spec_for(net, vid, p["alpha"], p["beta"], p["lrr"], p["r_min"])
             for vid in net.terminals}
    return net, inflow, trees


def regions_for(net) -> dict:
    """Default territories when the network uses the standard 57-vessel ids."""
    ids = set(net.ids)
    if all(v in ids for r in REGIONS.values() for v in r):
        return dict(REGIONS)
    return {}


def execute(cfg: RunConfig, write: bool = True):
    """Run one scenario; returns ``(result, report)`` and writes artifacts."""
    net, inflow, trees = prepare(cfg)
    result = run_simulation(net, inflow, cfg.grid, trees=trees, workers=cfg.workers)
    wia_ids = [v for v in cfg.wia_vessels if v in net]
    report = analyze(result, net, regions_for(net), wia_ids)
    report.meta.update({
        "posture": cfg.posture,
        "exercise": dataclasses.asdict(cfg.exercise),
        "inflow_mean_ml_s": inflow.mean(),
        "audit": result.audit,
        "grid": result.grid,
    })
    if write:
        out = cfg.output
        out.mkdir(parents=True, exist_ok=True)
        write_series(result, out)
        report.to_json(out / "report.json")
        write_run_summary(result, out)
        for vid, w in report.wia.items():
            write_wia_csv(w, out / f"wia_{vid:02d}.csv")
        if cfg.dump_spectra:
            specs = tree_spectra(trees, inflow.period, result.grid["n_samples"])
            for vid, sp in specs.items():
                sp.to_csv(out / f"spectrum_{vid:02d}.csv")
        write_manifest(cfg, result, out)
    return result, report


def write_manifest(cfg: RunConfig, result, out: Path):
    manifest = {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "grid": result.grid,
        "cycles": result.cycles,
        "converged": result.converged,
        "result_sha256": result.digest(),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def check(cfg: RunConfig) -> list[str]:
    """Validation report without time stepping."""
    lines = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        net = apply_parameters(load_network(cfg.network), cfg)
    for w in caught:
        lines.append(f"WARNING: {w.message}")
    validate_ids(cfg, net)
    lines.append(f"network: {len(net)} vessels, {len(net.terminals)} terminals, "
                 f"{len(net.junctions)} junctions")
    period = None
    if cfg.inflow is not None:
        inflow = load_waveform(cfg.inflow)
        if cfg.exercise.enabled:
            inflow = exercise_transform(inflow, cfg.exercise.flow_factor, cfg.exercise.period_factor)
        period = inflow.period
        lines.append(f"inflow: mean {inflow.mean():.4g} mL/s ({inflow.mean() * 0.06:.4g} L/min), "
                     f"period {period:.4g} s, heart rate {heart_rate(period):.1f} bpm")
    if cfg.measured_flows is not None:
        fs = load_flow_set(cfg.measured_flows)
        scaled = scale_measured_flows(fs)
        for name in scaled.order():
            fac = scaled.factors[name]
            if abs(fac - 1.0) > 1e-12:
                lines.append(f"flow scaling: {name}: {fs[name]:.4g} -> {scaled[name]:.4g} "
                             f"L/min (factor {fac:.4g})")
    if period is not None:
        rg = resolve_grid(net, period, cfg.grid)
        lines.append(f"grid: {sum(rg.npts.values())} points, N = {rg.n_samples}, "
                     f"dt = {rg.dt:.4e} s (CFL limit {rg.dt_cfl:.4e} s)")
    lines.append("OK")
    return lines


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result, report = execute(cfg)
    m = report.meta
    print(f"wrote {len(result.series)} vessel series to {cfg.output}")
    print(f"cycles {result.cycles} (converged: {result.converged}), "
          f"period {m['period_s']:.4g} s, heart rate {m['heart_rate_bpm']:.1f} bpm, "
          f"mean inflow {m['inflow_mean_ml_s']:.4g} mL/s")
    if not result.converged:
        print("warning: periodic convergence tolerance not reached", file=sys.stderr)
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _config_from_args(args)
    for line in check(cfg):
        print(line)
    return EXIT_OK


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    result = read_series(run_dir)
    with open(run_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    cfg = config_from_dict(manifest["config"], check_files=False)
    net = apply_parameters(load_network(args.network or cfg.network), cfg)
    report = analyze(result, net, regions_for(net), [v for v in cfg.wia_vessels if v in net])
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    report.to_json(out / "report.json")
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def cmd_scale_flows(args) -> int:
    fs = load_flow_set(args.flows)
    scaled = scale_measured_flows(fs)
    d = scaled.to_dict()
    d["junction_residuals"] = scaled.junction_residuals()
    text = json.dumps(d, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path) as fh:
            d = json.load(fh)
        base = path.parent
    else:
        d, base = {}, Path.cwd()
    # command-line flags win over the file; their paths are relative to cwd
    cwd = Path.cwd()
    if args.network:
        d["network"] = str((cwd / args.network).resolve())
    if getattr(args, "inflow", None):
        d["inflow"] = str((cwd / args.inflow).resolve())
    if getattr(args, "out", None):
        d["output"] = str((cwd / args.out).resolve())
    if getattr(args, "flows", None):
        d["measured_flows"] = str((cwd / args.flows).resolve())
    if args.posture:
        d["posture"] = args.posture
    ex = d.get("exercise", {})
    ex = {"enabled": ex} if isinstance(ex, bool) else dict(ex)
    if args.exercise:
        ex["enabled"] = True
    if args.flow_factor is not None:
        ex["flow_factor"] = args.flow_factor
    if args.period_factor is not None:
        ex["period_factor"] = args.period_factor
    if ex:
        d["exercise"] = ex
    grid = dict(d.get("grid", {}))
    if args.grid_dx is not None:
        grid["dx"] = args.grid_dx
    if args.cycles is not None:
        grid["max_cycles"] = args.cycles
    if grid:
        d["grid"] = grid
    if getattr(args, "workers", None) is not None:
        d["workers"] = args.workers
    if getattr(args, "dump_spectra", False):
        d["dump_spectra"] = True
    if "network" not in d:
        raise ConfigError("config.network: required (use --network or --config)")
    return config_from_dict(d, base=base)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hemo1d", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--network", help="network JSON file")
        p.add_argument("--inflow", help="inflow CSV (t_s,q_mls), one period")
        p.add_argument("--posture", choices=["supine", "upright"])
        p.add_argument("--exercise", action="store_true", help="apply the exercise inflow transform")
        p.add_argument("--flow-factor", type=float)
        p.add_argument("--period-factor", type=float)
        p.add_argument("--grid-dx", type=float, help="target spatial step (cm)")
        p.add_argument("--cycles", type=int, help="maximum number of cardiac cycles")

    p = sub.add_parser("run", help="simulate a scenario and write results")
    scenario(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="processes for tree spectra")
    p.add_argument("--dump-spectra", action="store_true", help="write tree impedance spectra")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="validate inputs and estimate the time step")
    scenario(p)
    p.add_argument("--flows", help="measured-flow JSON for a scaling dry run")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("analyze", help="recompute the report from saved series")
    p.add_argument("run_dir")
    p.add_argument("--network", help="network file (defaults to the one in the manifest)")
    p.add_argument("--out", help="directory for report.json (default: run_dir)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("scale-flows", help="rescale measured mean flows for conservation")
    p.add_argument("flows", help="measured-flow JSON")
    p.add_argument("--out", help="write the scaled set here")
    p.set_defaults(func=cmd_scale_flows)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
