"""Reading and writing simulation time series."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .solver import SimulationResult, VesselSeries

SERIES_HEADER = ["t_s", "x_cm", "p_mmHg", "q_mls", "A_cm2"]


def series_path(outdir, vid) -> Path:
    return Path(outdir) / f"vessel_{int(vid):02d}.csv"


def write_series(result: SimulationResult, outdir):
    """One CSV per vessel with every station, rows grouped by station."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for vid, s in result.series.items():
        with open(series_path(outdir, vid), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_HEADER)
            for row in s.rows(result.t):
                w.writerow([repr(float(v)) for v in row])


def write_run_summary(result: SimulationResult, outdir, extra: dict | None = None):
    d = result.summary()
    d["period_s"] = result.period
    if extra:
        d.update(extra)
    with open(Path(outdir) / "run_summary.json", "w") as fh:
        json.dump(_plain(d), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def read_series(outdir) -> SimulationResult:
    """Rebuild a result from a run directory written by :func:`write_series`."""
    outdir = Path(outdir)
    summary_file = outdir / "run_summary.json"
    if not summary_file.exists():
        raise FileNotFoundError(f"no run_summary.json in {outdir}")
    with open(summary_file) as fh:
        summary = json.load(fh)
    series = {}
    t = None
    for path in sorted(outdir.glob("vessel_*.csv")):
        vid = int(path.stem.split("_")[1])
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != SERIES_HEADER:
            raise ValueError(f"{path}: unexpected header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r])
        xs = np.unique(data[:, 1])
        n_t = len(data) // len(xs)
        block = data.reshape(len(xs), n_t, 5)
        t = block[0, :, 0]
        series[vid] = VesselSeries(vid, block[:, 0, 1], block[:, :, 2], block[:, :, 3],
                                   block[:, :, 4])
    if not series:
        raise FileNotFoundError(f"no vessel CSV files in {outdir}")
    return SimulationResult(t=t, period=summary["period_s"], series=series,
                            cycles=summary["cycles"], converged=summary["converged"],
                            cycle_changes=summary["cycle_changes"], audit=summary["audit"],
                            grid=summary["grid"], wall_time=summary["wall_time_s"],
                            nondim=summary.get("nondimensionalization", {}))
