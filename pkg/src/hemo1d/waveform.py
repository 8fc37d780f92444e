"""Periodic sampled waveforms (inflow and outputs)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline


class WaveformError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    """One period of a signal sampled at ``t[0] = 0 ... t[-1] = T``.

    ``kind`` is ``"flow"`` (mL/s) or ``"pressure"`` (g/cm/s^2).
    """

    t: np.ndarray
    values: np.ndarray
    kind: str = "flow"

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 4:
            raise WaveformError("need matching 1-D time and value arrays with >= 4 samples")
        if t[0] != 0.0:
            raise WaveformError("waveform must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise WaveformError("sample times must increase")
        peak = max(np.max(np.abs(v)), 1e-300)
        if abs(v[-1] - v[0]) > 0.01 * peak:
            raise WaveformError("waveform is not periodic: end value differs from start by >1% of peak")
        v = v.copy()
        v[-1] = v[0]
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def period(self) -> float:
        return float(self.t[-1])

    @property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.t, self.values, bc_type="periodic")

    def __call__(self, t):
        """Periodic cubic interpolation at arbitrary times."""
        return self.spline(np.mod(t, self.period))

    def mean(self) -> float:
        """Exact cycle mean of the interpolant."""
        return float(self.spline.integrate(0.0, self.period) / self.period)

    def resample(self, n: int) -> "Waveform":
        t = np.linspace(0.0, self.period, n + 1)
        return Waveform(t, self(t), self.kind)

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.t, self.values * factor, self.kind)

    def to_csv(self, path, value_header="q_mls"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", value_header])
            for a, b in zip(self.t, self.values):
                w.writerow([repr(float(a)), repr(float(b))])


def load_waveform(path, kind: str = "flow") -> Waveform:
    """Read a two-column CSV (``t_s,q_mls``) holding one period."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"waveform file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise WaveformError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if [h.strip() for h in header[:2]] != ["t_s", "q_mls"] and kind == "flow":
        raise WaveformError(f"{path}: expected header 't_s,q_mls', got {header}")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in body if r])
    except (ValueError, IndexError) as exc:
        raise WaveformError(f"{path}: bad row ({exc})") from None
    return Waveform(data[:, 0], data[:, 1], kind)


def synthetic_inflow(mean_flow: float, period: float, systole_fraction: float = 0.4,
                     backflow: float = 8.0, n: int = 512) -> Waveform:
    """Smooth aortic-root flow pulse with a given cycle mean (mL/s).

    Systolic ejection follows ``sin(pi t / ts)**1.5`` over ``ts``; a brief
    ``sin**2`` backflow of amplitude ``backflow`` marks valve closure; flow
    is zero for the rest of diastole. Samples are rescaled so the periodic
    spline mean equals ``mean_flow`` exactly.
    """
    ts = systole_fraction * period
    tn = 0.1 * period
    t = np.linspace(0.0, period, n + 1)
    q = np.zeros_like(t)
    sys = t < ts
    q[sys] = np.sin(np.pi * t[sys] / ts) ** 1.5
    dip = (t >= ts) & (t < ts + tn)
    shape = q.copy()
    back = np.zeros_like(t)
    back[dip] = -np.sin(np.pi * (t[dip] - ts) / tn) ** 2
    # choose the systolic amplitude so the mean matches, then polish
    a_sys = Waveform(t, shape).mean()
    a_back = Waveform(t, back).mean()
    amp = (mean_flow - backflow * a_back) / a_sys
    wf = Waveform(t, amp * shape + backflow * back)
    return wf.scaled(mean_flow / wf.mean())
