"""Network solver: Lax-Wendroff in every vessel, coupled at junctions.

The equations are solved in nondimensional form. Characteristic length
``L_c = 1 cm``, characteristic flow ``q_c = 10 mL/s`` and the blood density
fix the remaining scales::

    u_c = q_c / L_c**2          (10 cm/s)
    t_c = L_c / u_c             (0.1 s)
    p_c = rho * u_c**2

Inputs and outputs are always dimensional (CGS, pressures reported in mmHg).
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .network import VesselNetwork, assign_gravity_angles, gravity_cosine, radius_at, radius_slope
from .structured_tree import ImpedanceSpectrum, StructuredTreeSpec, root_impedance_spectrum
from .wall import MMHG
from .waveform import Waveform

log = logging.getLogger(__name__)

L_CHAR = 1.0     # cm
Q_CHAR = 10.0    # mL/s

_STATUS_TEXT = {
    K.NEGATIVE_AREA: "negative cross-sectional area",
    K.CFL_VIOLATION: "CFL condition violated",
    K.JUNCTION_DIVERGED: "junction Newton iteration did not converge",
    K.BOUNDARY_DIVERGED: "boundary Newton iteration did not converge",
}


class SimulationError(RuntimeError):
    """Numerical failure during time stepping."""

    def __init__(self, message, status=None, vessel=None, where=None):
        super().__init__(message)
        self.status = status
        self.vessel = vessel
        self.where = where


@dataclass(frozen=True)
class Scales:
    rho: float
    length: float = L_CHAR
    flow: float = Q_CHAR

    @property
    def velocity(self):
        return self.flow / self.length**2

    @property
    def time(self):
        return self.length / self.velocity

    @property
    def pressure(self):
        return self.rho * self.velocity**2

    @property
    def impedance(self):
        return self.pressure / self.flow


@dataclass(frozen=True)
class GridConfig:
    """Discretization and cycle-control settings.

    ``dx`` is the target spatial step; each vessel gets an odd number of
    points (at least ``min_points``) so its midpoint is a grid node. The time
    step is ``T / N`` where ``N`` is the smallest power of two that is at least
    ``min_samples`` and keeps ``dt <= cfl_safety * min(dx / c0)``. Setting
    ``n_samples`` forces ``N``.
    """

    dx: float = 0.1
    cfl_safety: float = 0.5
    min_points: int = 9
    n_samples: int | None = None
    min_samples: int = 1024
    max_cycles: int = 20
    tol: float = 1e-3
    n_out: int = 1024
    block: int = 256

    def __post_init__(self):
        if self.dx <= 0 or not 0 < self.cfl_safety <= 1:
            raise ValueError("dx must be positive and 0 < cfl_safety <= 1")
        if self.min_points < 3:
            raise ValueError("min_points must be at least 3")
        if self.max_cycles < 1 or self.tol <= 0:
            raise ValueError("max_cycles must be >= 1 and tol positive")
        if self.n_samples is not None and (self.n_samples < 16 or self.n_samples % 2):
            raise ValueError("n_samples must be even and >= 16")


@dataclass(frozen=True)
class ResolvedGrid:
    npts: dict
    dx: dict
    dt: float
    n_samples: int
    dt_cfl: float
    block: int
    n_out: int

    def as_dict(self):
        return {"dt_s": self.dt, "n_samples": self.n_samples, "dt_cfl_s": self.dt_cfl,
                "grid_points": int(sum(self.npts.values())),
                "dx_min_cm": float(min(self.dx.values())),
                "dx_max_cm": float(max(self.dx.values()))}


def reference_wave_speed(net: VesselNetwork, vid: int, x) -> np.ndarray:
    r0 = radius_at(net[vid], x)
    ehr = net.stiffness_at(vid, r0)
    return np.sqrt(2.0 * ehr / (3.0 * net.rho))


def resolve_grid(net: VesselNetwork, period: float, grid: GridConfig) -> ResolvedGrid:
    """Per-vessel point counts and the global time step."""
    npts, dxs = {}, {}
    dt_cfl = math.inf
    for v in net.vessels:
        n = max(grid.min_points, int(math.ceil(v.length / grid.dx)) + 1)
        if n % 2 == 0:
            n += 1
        h = v.length / (n - 1)
        npts[v.id], dxs[v.id] = n, h
        c0 = reference_wave_speed(net, v.id, np.linspace(0.0, v.length, n))
        dt_cfl = min(dt_cfl, grid.cfl_safety * h / float(np.max(c0)))
    if grid.n_samples is not None:
        N = grid.n_samples
    else:
        need = max(grid.min_samples, period / dt_cfl)
        N = 1 << int(math.ceil(math.log2(need)))
    block = math.gcd(grid.block, N)
    n_out = math.gcd(grid.n_out, N)
    return ResolvedGrid(npts, dxs, period / N, N, dt_cfl, block, n_out)


def boundary_layer_thickness(nu: float, period: float) -> float:
    return math.sqrt(nu * period / (2.0 * math.pi))


# ---------------------------------------------------------------------------
# structured trees

_SPECTRUM_CACHE: dict = {}


def tree_spec_for(net: VesselNetwork, vid: int, alpha=0.9, beta=0.6, lrr=50.0,
                  r_min=0.01) -> StructuredTreeSpec:
    """Tree hung on the outlet of terminal vessel ``vid``.

    The root radius is the vessel's outlet radius. A per-vessel ``r_min``
    overrides the default; the tree wall uses the network's nominal stiffness.
    """
    v = net[vid]
    return StructuredTreeSpec(
        r_root=v.r_out, alpha=alpha, beta=beta, lrr=lrr,
        r_min=v.r_min if v.r_min is not None else r_min,
        rho=net.rho, mu=net.mu, k1=net.k1, k2=net.k2, k3=net.k3,
        k2_convention=net.k2_convention)


def _spectrum_job(args):
    spec, period, n = args
    return root_impedance_spectrum(spec, period, n)


def tree_spectra(specs: dict, period: float, n_samples: int, workers: int = 1,
                 cache: bool = True) -> dict:
    """Impedance spectra for ``{vessel id: StructuredTreeSpec}``.

    Identical trees are computed once. Results do not depend on ``workers``:
    each spectrum is a pure function of its inputs.
    """
    unique = {}
    for vid, spec in specs.items():
        unique.setdefault((spec, period, n_samples), []).append(vid)
    todo = [k for k in unique if not (cache and k in _SPECTRUM_CACHE)]
    if todo:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                done = list(pool.map(_spectrum_job, todo))
        else:
            done = [_spectrum_job(k) for k in todo]
        for k, sp in zip(todo, done):
            if sp.flagged:
                log.warning("tree r_root=%g: %d resonant frequencies perturbed",
                            k[0].r_root, len(sp.flagged))
            if cache:
                _SPECTRUM_CACHE[k] = sp
            else:
                unique[k] = (unique[k], sp)
    out = {}
    for k, vids in unique.items():
        if isinstance(vids, tuple):
            vids, sp = vids
        else:
            sp = _SPECTRUM_CACHE[k]
        for vid in vids:
            out[vid] = sp
    return out


def resistance_spectrum(resistance: float, period: float, n_samples: int) -> ImpedanceSpectrum:
    """Spectrum of a pure resistance (flat impedance)."""
    omega = 2.0 * np.pi * np.arange(n_samples // 2 + 1) / period
    Z = np.full(omega.shape, resistance, dtype=complex)
    z = np.fft.irfft(Z, n=n_samples) / (period / n_samples)
    return ImpedanceSpectrum(period, n_samples, omega, Z, z)


# ---------------------------------------------------------------------------
# results


@dataclass
class VesselSeries:
    """Last-cycle time series at the output stations of one vessel."""

    vessel: int
    x: np.ndarray         # station positions, cm
    p: np.ndarray         # mmHg, shape (n_stations, n_out)
    q: np.ndarray         # mL/s
    A: np.ndarray         # cm^2

    @property
    def mid(self) -> int:
        return len(self.x) // 2

    def rows(self, t):
        for s, xs in enumerate(self.x):
            for k, tk in enumerate(t):
                yield (tk, xs, self.p[s, k], self.q[s, k], self.A[s, k])


@dataclass
class SimulationResult:
    t: np.ndarray
    period: float
    series: dict
    cycles: int
    converged: bool
    cycle_changes: list
    audit: dict
    grid: dict
    wall_time: float
    nondim: dict = field(default_factory=dict)

    def __getitem__(self, vid) -> VesselSeries:
        return self.series[vid]

    def digest(self) -> str:
        """SHA-256 over all output arrays; equal digests mean identical results."""
        h = hashlib.sha256()
        h.update(self.t.tobytes())
        for vid in sorted(self.series):
            s = self.series[vid]
            for arr in (s.x, s.p, s.q, s.A):
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def summary(self) -> dict:
        return {"cycles": self.cycles, "converged": self.converged,
                "cycle_changes": [float(c) for c in self.cycle_changes],
                "audit": self.audit, "grid": self.grid,
                "wall_time_s": self.wall_time, "nondimensionalization": self.nondim}


# ---------------------------------------------------------------------------
# assembly


@dataclass
class _Model:
    ids: list
    off: np.ndarray
    npts: np.ndarray
    dx: np.ndarray       # nondimensional
    r0: np.ndarray
    a0: np.ndarray
    f: np.ndarray
    fr: np.ndarray
    r0x: np.ndarray
    r0h: np.ndarray
    a0h: np.ndarray
    fh: np.ndarray
    frh: np.ndarray
    r0xh: np.ndarray
    gcos: np.ndarray
    x_dim: list


def _assemble(net: VesselNetwork, rg: ResolvedGrid, sc: Scales) -> _Model:
    ids = net.ids
    npts = np.array([rg.npts[v] for v in ids], dtype=np.int64)
    off = np.concatenate([[0], np.cumsum(npts)[:-1]]).astype(np.int64)
    tot = int(npts.sum())
    arrs = {k: np.zeros(tot) for k in ("r0", "a0", "f", "fr", "r0x", "r0h", "a0h", "fh", "frh", "r0xh")}
    dx = np.zeros(len(ids))
    gcos = np.zeros(len(ids))
    x_dim = []
    for n, vid in enumerate(ids):
        v = net[vid]
        o, m = off[n], npts[n]
        x = np.linspace(0.0, v.length, m)
        xh = 0.5 * (x[:-1] + x[1:])
        x_dim.append(x)
        dx[n] = rg.dx[vid] / sc.length
        gcos[n] = gravity_cosine(v.theta) * net.g * sc.time**2 / sc.length
        for xs, sfx, cnt in ((x, "", m), (xh, "h", m - 1)):
            r = radius_at(v, xs)
            slope = radius_slope(v, xs)
            ehr = net.stiffness_at(vid, r)
            dehr = net.stiffness_slope_at(vid, r)
            sl = slice(o, o + cnt)
            arrs["r0" + sfx][sl] = r / sc.length
            arrs["a0" + sfx][sl] = np.pi * r**2 / sc.length**2
            arrs["f" + sfx][sl] = 4.0 / 3.0 * ehr / sc.pressure
            arrs["fr" + sfx][sl] = 4.0 / 3.0 * dehr * sc.length / sc.pressure
            arrs["r0x" + sfx][sl] = slope
    return _Model(ids=ids, off=off, npts=npts, dx=dx, gcos=gcos, x_dim=x_dim, **arrs)


def _station_nodes(npts: int) -> list[int]:
    return [0, (npts - 1) // 2, npts - 1]


def run_simulation(network: VesselNetwork, inflow: Waveform, grid: GridConfig | None = None,
                   posture: str | None = None, trees: dict | None = None, workers: int = 1,
                   initial: str = "rest") -> SimulationResult:
    """Integrate the network over cardiac cycles until periodic.

    Parameters
    ----------
    network : VesselNetwork
    inflow : Waveform
        Flow at the root inlet, one period (mL/s).
    grid : GridConfig, optional
    posture : {"supine", "upright"}, optional
        Overrides the network's posture and reassigns gravity angles.
    trees : dict, optional
        ``{terminal id: StructuredTreeSpec, ImpedanceSpectrum or resistance}``;
        a plain number is a pure resistance (g/cm^4/s). Missing terminals get
        :func:`tree_spec_for` defaults.
    workers : int
        Processes used for tree spectra. Does not change results.

    Returns
    -------
    SimulationResult
        Last-cycle series at the inlet, midpoint and outlet of every vessel.

    Raises
    ------
    SimulationError
        On negative area, CFL violation or Newton failure.
    """
    t_start = time.perf_counter()
    grid = grid or GridConfig()
    net = network
    if posture is not None:
        net = assign_gravity_angles(net, posture)
    period = inflow.period
    rg = resolve_grid(net, period, grid)
    N, dt = rg.n_samples, rg.dt
    sc = Scales(net.rho)
    model = _assemble(net, rg, sc)
    idx = {vid: n for n, vid in enumerate(model.ids)}

    # terminal impedances
    trees = dict(trees or {})
    specs = {}
    spectra = {}
    for vid in net.terminals:
        item = trees.get(vid)
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            spectra[vid] = resistance_spectrum(float(item), period, N)
        elif isinstance(item, ImpedanceSpectrum):
            if abs(item.period - period) > 1e-12 * period or item.n_samples != N:
                raise ValueError(f"spectrum for vessel {vid} does not match period/N of the run")
            spectra[vid] = item
        else:
            specs[vid] = item if item is not None else tree_spec_for(net, vid)
    spectra.update(tree_spectra(specs, period, N, workers=workers))

    t_ids = np.array([idx[v] for v in net.terminals], dtype=np.int64)
    nt = len(t_ids)
    B = rg.block
    z_nd = np.array([spectra[v].z for v in net.terminals]) * dt / sc.impedance
    z_fft = np.fft.rfft(z_nd, axis=1)
    dtz = np.ascontiguousarray(z_nd[:, :B])

    # junction tables
    juncs = net.junctions
    j_par = np.array([idx[p] for p, _ in juncs], dtype=np.int64)
    j_ptr = np.zeros(len(juncs) + 1, dtype=np.int64)
    dau = []
    for n, (_, kids) in enumerate(juncs):
        if len(kids) > 8:
            raise ValueError("at most 8 daughters per junction are supported")
        dau.extend(idx[k] for k in kids)
        j_ptr[n + 1] = len(dau)
    j_dau = np.array(dau, dtype=np.int64)

    # inflow sampled at t_m = m dt
    qin = inflow(np.arange(N) * dt) / sc.flow

    nu = net.nu * sc.time / sc.length**2
    delta = boundary_layer_thickness(net.nu, period) / sc.length
    dt_nd = dt / sc.time

    A = model.a0.copy()
    q = np.zeros_like(A)
    An = A.copy()
    qn = q.copy()
    qhist = np.zeros((nt, N))
    qblk = np.zeros((nt, B))
    hold = np.zeros((nt, B))
    st_idx = np.array([_station_nodes(int(n)) for n in model.npts], dtype=np.int64)
    rec_stride = N // rg.n_out
    rec = np.zeros((len(model.ids), 3, 2, rg.n_out))
    stats = np.zeros(5)
    info = np.zeros(2, dtype=np.int64)
    root = idx[net.root]

    def stored_volume(area):
        vol = 0.0
        for n in range(len(model.ids)):
            o, m = model.off[n], model.npts[n]
            seg = area[o:o + m]
            vol += model.dx[n] * (seg.sum() - 0.5 * (seg[0] + seg[-1]))
        return vol

    prev = None
    changes = []
    converged = False
    cycle = 0
    while cycle < grid.max_cycles:
        cycle += 1
        stats[:] = 0.0
        v_start = stored_volume(A)
        for b0 in range(0, N, B):
            m0 = (cycle - 1) * N + b0
            first = m0 + 1
            h = np.roll(qhist, -(first % N), axis=1)
            circ = np.fft.irfft(np.fft.rfft(h, axis=1) * z_fft, n=N, axis=1)[:, :B]
            # remove lags that will be supplied by this block's new flows
            for t in range(nt):
                circ[t] -= np.convolve(dtz[t], h[t, :B])[:B]
            hold[:] = circ
            qblk[:] = 0.0
            status = K.advance_block(
                m0, B, N, dt_nd, A, q, An, qn,
                model.r0, model.a0, model.f, model.fr, model.r0x,
                model.r0h, model.a0h, model.fh, model.frh, model.r0xh,
                model.off, model.npts, model.dx, model.gcos, nu, delta,
                root, qin, j_par, j_ptr, j_dau, t_ids, dtz, hold, qblk, qhist,
                rec_stride, st_idx, rec, stats, info)
            if status != K.OK:
                vid = model.ids[info[0]] if info[0] >= 0 else None
                raise SimulationError(
                    f"{_STATUS_TEXT[status]} (cycle {cycle}, vessel {vid}, index {int(info[1])})",
                    status=status, vessel=vid, where=int(info[1]))
        # cycle-to-cycle change of p and q at the stations
        cur = _dimensional_series(rec, model, st_idx, sc, net.p0)
        if prev is not None:
            change = _relative_change(prev, cur)
            changes.append(change)
            log.info("cycle %d: relative change %.3e", cycle, change)
            if change < grid.tol:
                converged = True
                prev = cur
                break
        prev = cur

    v_end = stored_volume(A)
    v_in = stats[3]
    v_out = stats[4]
    dv = v_end - v_start
    vol_scale = sc.length**3
    audit = {
        "inflow_volume_ml": v_in * vol_scale,
        "outflow_volume_ml": v_out * vol_scale,
        "stored_volume_change_ml": dv * vol_scale,
        "volume_error_rel": abs(v_in - v_out - dv) / max(abs(v_in), 1e-300),
        "max_junction_flow_residual": stats[0],
        "max_junction_pressure_residual": stats[1],
        "max_cfl": stats[2],
    }
    series = {}
    p_all, q_all, a_all = prev
    for n, vid in enumerate(model.ids):
        xs = model.x_dim[n][st_idx[n]]
        series[vid] = VesselSeries(vid, xs, p_all[n], q_all[n], a_all[n])
    t = np.arange(rg.n_out) * (period / rg.n_out)
    if not converged:
        log.warning("no periodic convergence after %d cycles", cycle)
    nd = {"length_cm": sc.length, "flow_ml_s": sc.flow, "time_s": sc.time,
          "pressure_g_cm_s2": sc.pressure, "rho": sc.rho}
    gd = rg.as_dict()
    gd["boundary_layer_cm"] = delta * sc.length
    return SimulationResult(t=t, period=period, series=series, cycles=cycle,
                            converged=converged, cycle_changes=changes, audit=audit,
                            grid=gd, wall_time=time.perf_counter() - t_start, nondim=nd)


def _dimensional_series(rec, model, st_idx, sc, p0):
    nv = rec.shape[0]
    a_nd = rec[:, :, 0, :]
    q_nd = rec[:, :, 1, :]
    p = np.empty_like(a_nd)
    for n in range(nv):
        nodes = model.off[n] + st_idx[n]
        f = model.f[nodes][:, None]
        a0 = model.a0[nodes][:, None]
        p[n] = f * (1.0 - np.sqrt(a0 / a_nd[n]))
    return ((p * sc.pressure + p0) / MMHG, q_nd * sc.flow, a_nd * sc.length**2)


def _relative_change(prev, cur):
    out = 0.0
    for a, b in zip(prev[:2], cur[:2]):
        scale = max(np.linalg.norm(b), 1e-12 * b.size)
        out = max(out, float(np.linalg.norm(b - a) / scale))
    return out
