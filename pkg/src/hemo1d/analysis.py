"""Post-processing: wave intensity, reflection, wall shear, flow split."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .network import VesselNetwork
from .wall import MMHG
from .waveform import Waveform

LABELS = ("FCW", "FEW", "BCW", "BEW")


class AnalysisError(ValueError):
    pass


@dataclass
class WiaResult:
    """Wave-intensity decomposition of one periodic signal pair.

    Increments ``dp_*`` and ``du_*`` are forward differences over one sample;
    ``dpdt_*`` and ``dudt_*`` are centered time derivatives. Cumulative
    ``p_*`` and ``u_*`` start at zero.
    """

    t: np.ndarray
    rho_c: float
    dp: np.ndarray
    du: np.ndarray
    dp_plus: np.ndarray
    dp_minus: np.ndarray
    du_plus: np.ndarray
    du_minus: np.ndarray
    dpdt_plus: np.ndarray
    dpdt_minus: np.ndarray
    dudt_plus: np.ndarray
    dudt_minus: np.ndarray
    wi_plus: np.ndarray
    wi_minus: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    segments: list = field(default_factory=list)

    def labels(self) -> dict:
        """Per-sample masks for the four wave types."""
        return {
            "FCW": self.dpdt_plus > 0,
            "FEW": self.dpdt_plus < 0,
            "BCW": self.dpdt_minus > 0,
            "BEW": self.dpdt_minus < 0,
        }


def _segments(t, wi, sign_of, pos_label, neg_label, threshold):
    peak = np.max(np.abs(wi)) if wi.size else 0.0
    if peak == 0:
        return []
    active = np.abs(wi) > threshold * peak
    lab = np.where(sign_of > 0, 1, -1) * active
    out = []
    k = 0
    n = len(lab)
    while k < n:
        if lab[k] == 0:
            k += 1
            continue
        j = k
        while j + 1 < n and lab[j + 1] == lab[k]:
            j += 1
        name = pos_label if lab[k] > 0 else neg_label
        out.append({"type": name, "t_start": float(t[k]), "t_end": float(t[j]),
                    "peak_wi": float(wi[k:j + 1][np.argmax(np.abs(wi[k:j + 1]))])})
        k = j + 1
    return out


def wia_decompose(t, p, q, A, rho: float, c: float, threshold: float = 0.05) -> WiaResult:
    """Split pressure and velocity changes into forward and backward waves.

    Parameters
    ----------
    t : array
        Uniform sample times over one period (endpoint excluded).
    p : array
        Pressure, g/cm/s^2.
    q, A : array
        Flow (mL/s) and area (cm^2); velocity is ``q / A``.
    rho, c : float
        Density and wave speed used in the characteristic impedance.
    threshold : float
        Wave segments are reported where ``|WI|`` exceeds this fraction of
        its maximum.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    A = np.asarray(A, dtype=float)
    n = len(t)
    if not (len(p) == len(q) == len(A) == n) or n < 3:
        raise AnalysisError("t, p, q and A must have the same length (>= 3)")
    if c <= 0 or rho <= 0:
        raise AnalysisError("rho and c must be positive")
    h = t[1] - t[0]
    u = q / A
    zc = rho * c
    dp = np.roll(p, -1) - p
    du = np.roll(u, -1) - u
    dp_plus = 0.5 * (dp + zc * du)
    dp_minus = 0.5 * (dp - zc * du)
    du_plus = 0.5 * (du + dp / zc)
    du_minus = 0.5 * (du - dp / zc)
    # centered derivatives on the periodic grid
    dpdt = (np.roll(p, -1) - np.roll(p, 1)) / (2 * h)
    dudt = (np.roll(u, -1) - np.roll(u, 1)) / (2 * h)
    dpdt_plus = 0.5 * (dpdt + zc * dudt)
    dpdt_minus = 0.5 * (dpdt - zc * dudt)
    dudt_plus = 0.5 * (dudt + dpdt / zc)
    dudt_minus = 0.5 * (dudt - dpdt / zc)
    wi_plus = dpdt_plus * dudt_plus
    wi_minus = dpdt_minus * dudt_minus
    cum = lambda d: np.concatenate([[0.0], np.cumsum(d[:-1])])  # noqa: E731
    res = WiaResult(t=t, rho_c=zc, dp=dp, du=du, dp_plus=dp_plus, dp_minus=dp_minus,
                    du_plus=du_plus, du_minus=du_minus, dpdt_plus=dpdt_plus,
                    dpdt_minus=dpdt_minus, dudt_plus=dudt_plus, dudt_minus=dudt_minus,
                    wi_plus=wi_plus, wi_minus=wi_minus, p_plus=cum(dp_plus),
                    p_minus=cum(dp_minus), u_plus=cum(du_plus), u_minus=cum(du_minus))
    res.segments = (_segments(t, wi_plus, dpdt_plus, "FCW", "FEW", threshold)
                    + _segments(t, wi_minus, dpdt_minus, "BCW", "BEW", threshold))
    return res


def compression_window(wia: WiaResult) -> tuple[int, int]:
    """Sample range ``[start, stop)`` of the systolic forward compression.

    The window starts at the foot of the steepest forward compression (the
    last sample before it where ``dp+`` is not positive) and ends where
    ``dp+`` next turns from non-positive to positive after the peak of the
    cumulative forward pressure, which marks the end of the systolic
    expansion. Indices may exceed the period and wrap.
    """
    d = wia.dp_plus
    n = len(d)
    k_peak = int(np.argmax(d))
    if d[k_peak] <= 0:
        raise AnalysisError("no forward compression wave found")
    start = k_peak
    while start > k_peak - n and d[(start - 1) % n] > 0:
        start -= 1
    # cumulative forward pressure from the foot
    k = k_peak
    while k < start + n and d[k % n] > 0:
        k += 1
    # k is the top of the compression; now pass through the expansion
    while k < start + n and d[k % n] <= 0:
        k += 1
    return start, k


def reflection_coefficient(wia: WiaResult, window: tuple[int, int] | None = None) -> float:
    """Ratio of reflected to incident compression amplitudes.

    Amplitudes are ``max - min`` of the cumulative backward and forward
    pressures over the compression window.
    """
    start, stop = window if window is not None else compression_window(wia)
    idx = np.arange(start, stop) % len(wia.dp_plus)
    pp = np.concatenate([[0.0], np.cumsum(wia.dp_plus[idx])])
    pm = np.concatenate([[0.0], np.cumsum(wia.dp_minus[idx])])
    d_plus = pp.max() - pp.min()
    d_minus = pm.max() - pm.min()
    if d_plus <= 0 or not np.isfinite(d_plus):
        raise AnalysisError("incident compression amplitude is zero")
    return float(d_minus / d_plus)


def wall_shear_stress(q, A, mu: float, delta: float):
    """Wall shear stress ``mu * (q / A) / delta`` (g/cm/s^2)."""
    q = np.asarray(q, dtype=float)
    A = np.asarray(A, dtype=float)
    if np.any(A <= 0):
        raise AnalysisError("area must be positive")
    if delta <= 0:
        raise AnalysisError("boundary layer thickness must be positive")
    return mu * (q / A) / delta


def flow_fractions(result, network: VesselNetwork, regions: dict) -> dict:
    """Mean regional flow over mean ascending-aorta flow.

    ``regions`` maps names to vessel-id collections; each vessel's flow is
    its cycle-mean flow at the midpoint station.
    """
    root = network.root
    base = float(np.mean(result[root].q[result[root].mid]))
    if base == 0:
        raise AnalysisError("mean root flow is zero")
    out = {}
    for name, ids in regions.items():
        tot = 0.0
        for vid in ids:
            if vid not in result.series:
                raise AnalysisError(f"region {name!r}: unknown vessel id {vid}")
            s = result[vid]
            tot += float(np.mean(s.q[s.mid]))
        out[name] = tot / base
    return out


def exercise_transform(inflow: Waveform, flow_factor: float = 2.0,
                       period_factor: float = 0.6, n: int | None = None) -> Waveform:
    """Scale flow by ``flow_factor`` and compress time by ``period_factor``.

    With ``n=None`` the original samples are kept on the compressed time
    axis, so the cycle mean scales exactly; otherwise the result is
    resampled to ``n`` intervals.
    """
    if flow_factor <= 0 or period_factor <= 0:
        raise ValueError("flow and period factors must be positive")
    out = Waveform(inflow.t * period_factor, inflow.values * flow_factor, inflow.kind)
    return out if n is None else out.resample(n)


def heart_rate(period: float) -> float:
    return 60.0 / period


def pressure_stats(p) -> tuple[float, float, float]:
    """(systolic, diastolic, pulse) of one period of pressure."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        raise AnalysisError("empty pressure series")
    hi, lo = float(p.max()), float(p.min())
    return hi, lo, hi - lo


# ---------------------------------------------------------------------------
# report


@dataclass
class AnalysisReport:
    pressures: dict
    wss: dict
    flow_fractions: dict
    wia: dict
    reflection: dict
    meta: dict

    def to_dict(self) -> dict:
        return {"meta": self.meta, "pressures_mmHg": self.pressures, "wss": self.wss,
                "flow_fractions": self.flow_fractions, "reflection_coefficients": self.reflection}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(_clean(self.to_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def vessel_wia(result, network: VesselNetwork, vid: int, station: int | None = None) -> WiaResult:
    """WIA at a station (default midpoint) with ``c`` from the local reference wall."""
    from .network import radius_at
    s = result[vid]
    st = s.mid if station is None else station
    r0 = radius_at(network[vid], s.x[st])
    c = math.sqrt(2.0 * network.stiffness_at(vid, r0) / (3.0 * network.rho))
    return wia_decompose(result.t, s.p[st] * MMHG, s.q[st], s.A[st], network.rho, c)


def analyze(result, network: VesselNetwork, regions: dict | None = None,
            wia_vessels=(), delta: float | None = None) -> AnalysisReport:
    """Pressure statistics, WSS, flow fractions and WIA for one run."""
    if delta is None:
        delta = result.grid["boundary_layer_cm"]
    pressures, wss = {}, {}
    for vid, s in result.series.items():
        sys_, dia, pulse = pressure_stats(s.p[s.mid])
        pressures[vid] = {"systolic": sys_, "diastolic": dia, "pulse": pulse,
                          "mean": float(np.mean(s.p[s.mid]))}
        tau = wall_shear_stress(s.q, s.A, network.mu, delta)
        wss[vid] = {"max": float(tau.max()), "min": float(tau.min()),
                    "mean_mid": float(tau[s.mid].mean())}
    fractions = flow_fractions(result, network, regions) if regions else {}
    wia, refl = {}, {}
    for vid in wia_vessels:
        w = vessel_wia(result, network, vid)
        wia[vid] = w
        try:
            refl[vid] = reflection_coefficient(w)
        except AnalysisError:
            refl[vid] = float("nan")
    root = result[network.root]
    meta = {"period_s": result.period, "heart_rate_bpm": heart_rate(result.period),
            "mean_inflow_ml_s": float(np.mean(root.q[0])),
            "boundary_layer_cm": delta, "cycles": result.cycles,
            "converged": result.converged}
    return AnalysisReport(pressures, wss, fractions, wia, refl, meta)


def write_wia_csv(wia: WiaResult, path):
    cols = ("t", "dpdt_plus", "dpdt_minus", "dudt_plus", "dudt_minus", "wi_plus", "wi_minus",
            "p_plus", "p_minus", "u_plus", "u_minus")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(getattr(wia, c) for c in cols)):
            w.writerow([repr(float(v)) for v in row])
