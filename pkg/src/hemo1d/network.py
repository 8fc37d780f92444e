"""Arterial network description and construction utilities.

A network is a rooted tree of tapered elastic vessels. Geometry, material
constants and per-vessel overrides are read from a JSON file (CGS units)::

    {"fluid": {"rho": 1.057, "mu": 0.032, "g": 981.0, "p0": 0.0},   # or "p0_mmHg"
     "stiffness": {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5},
     "taper": {"n2": 0.1},
     "vessels": [{"id": 1, "name": "Ascending aorta", "length_cm": 4.07,
                  "r_in_cm": 1.2, "r_out_cm": 1.1, "parent": null,
                  "orientation": "up", "terminal": false,
                  "overrides": {"k3": 3.8e5, "r_min": 0.03}}, ...]}
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .wall import K1_DEFAULT, K2_DEFAULT, K3_DEFAULT, MMHG, stiffness, stiffness_slope

log = logging.getLogger(__name__)

RHO_DEFAULT = 1.057
MU_DEFAULT = 0.032
G_DEFAULT = 981.0
TAPER_N2_DEFAULT = 0.1

ORIENTATION_ANGLES = {"up": -math.pi, "down": 0.0, "horizontal": math.pi / 2}
POSTURES = ("supine", "upright")


class NetworkError(ValueError):
    """Invalid network file or topology."""


class TopologyError(NetworkError):
    pass


@dataclass(frozen=True)
class Vessel:
    id: int
    name: str
    length: float
    r_in: float
    r_out: float
    parent: int | None = None
    orientation: str | None = None
    terminal: bool = False
    k3: float | None = None
    r_min: float | None = None
    n2: float = TAPER_N2_DEFAULT
    theta: float = math.pi / 2

    def __post_init__(self):
        if not self.length > 0:
            raise NetworkError(f"vessel {self.id}: length must be positive")
        if not (self.r_in > 0 and self.r_out > 0):
            raise NetworkError(f"vessel {self.id}: radii must be positive")
        if self.n2 < 0:
            raise NetworkError(f"vessel {self.id}: taper rate must be non-negative")

    @property
    def taper(self) -> tuple[float, float, float]:
        """Coefficients ``(n1, n2, n3)`` of ``r = n1 exp(-n2 x) + n3``.

        Chosen so the profile passes through both measured end radii. A zero
        rate degenerates to a linear taper.
        """
        drop = self.r_in - self.r_out
        if drop == 0:
            return 0.0, self.n2, self.r_in
        if self.n2 * self.length < 1e-8:
            # linear limit; radius_at handles it
            return drop, 0.0, self.r_out
        n1 = drop / -math.expm1(-self.n2 * self.length)
        return n1, self.n2, self.r_in - n1

    @property
    def expanding(self) -> bool:
        return self.r_out > self.r_in


def radius_at(vessel: Vessel, x):
    """Reference radius at axial position ``x`` (cm), ``0 <= x <= L``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > vessel.length * (1 + 1e-12)):
        raise ValueError(f"x outside [0, {vessel.length}] for vessel {vessel.id}")
    n1, n2, n3 = vessel.taper
    if n2 == 0.0 and n1 != 0.0:
        out = vessel.r_in - n1 * xa / vessel.length
    else:
        out = n1 * np.exp(-n2 * xa) + n3
    return out if out.ndim else float(out)


def radius_slope(vessel: Vessel, x):
    """d r0 / dx along the vessel."""
    xa = np.asarray(x, dtype=float)
    n1, n2, n3 = vessel.taper
    if n2 == 0.0 and n1 != 0.0:
        out = np.full_like(xa, -n1 / vessel.length)
    else:
        out = -n1 * n2 * np.exp(-n2 * xa)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VesselNetwork:
    vessels: tuple[Vessel, ...]
    k1: float = K1_DEFAULT
    k2: float = K2_DEFAULT
    k3: float = K3_DEFAULT
    k2_convention: str = "decaying"
    rho: float = RHO_DEFAULT
    mu: float = MU_DEFAULT
    g: float = G_DEFAULT
    p0: float = 0.0
    posture: str = "supine"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.id: i for i, v in enumerate(self.vessels)})
        _validate(self)

    def __len__(self):
        return len(self.vessels)

    def __getitem__(self, vid: int) -> Vessel:
        return self.vessels[self._index[vid]]

    def __contains__(self, vid):
        return vid in self._index

    @property
    def ids(self) -> list[int]:
        return [v.id for v in self.vessels]

    @property
    def root(self) -> int:
        return next(v.id for v in self.vessels if v.parent is None)

    @property
    def nu(self) -> float:
        return self.mu / self.rho

    def children(self, vid: int) -> list[int]:
        return [v.id for v in self.vessels if v.parent == vid]

    @property
    def junctions(self) -> list[tuple[int, list[int]]]:
        """``(parent id, daughter ids)`` for every vessel with daughters."""
        out = []
        for v in self.vessels:
            kids = self.children(v.id)
            if kids:
                out.append((v.id, kids))
        return out

    @property
    def terminals(self) -> list[int]:
        return [v.id for v in self.vessels if v.terminal]

    def k3_of(self, vid: int) -> float:
        v = self[vid]
        return self.k3 if v.k3 is None else v.k3

    def stiffness_at(self, vid: int, r0):
        return stiffness(r0, self.k1, self.k2, self.k3_of(vid), self.k2_convention)

    def stiffness_slope_at(self, vid: int, r0):
        return stiffness_slope(r0, self.k1, self.k2, self.k3_of(vid), self.k2_convention)

    def downstream(self, vid: int) -> list[int]:
        """``vid`` and every vessel below it."""
        out, stack = [], [vid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(self.children(cur))
        return sorted(out)

    def replace(self, **changes) -> "VesselNetwork":
        return dataclasses.replace(self, **changes)

    def replace_vessels(self, vessels) -> "VesselNetwork":
        return dataclasses.replace(self, vessels=tuple(vessels))


def _validate(net: VesselNetwork):
    if net.rho <= 0 or net.mu <= 0:
        raise NetworkError("rho and mu must be positive")
    if net.posture not in POSTURES:
        raise NetworkError(f"unknown posture {net.posture!r}")
    if not net.vessels:
        raise TopologyError("network has no vessels")
    ids = [v.id for v in net.vessels]
    if len(set(ids)) != len(ids):
        raise TopologyError("duplicate vessel ids")
    roots = [v.id for v in net.vessels if v.parent is None]
    if len(roots) != 1:
        raise TopologyError(f"expected exactly one root, found {roots}")
    known = set(ids)
    for v in net.vessels:
        if v.parent is not None and v.parent not in known:
            raise TopologyError(f"vessel {v.id} has unknown parent {v.parent}")
    # every vessel must reach the root without revisiting a node
    parent = {v.id: v.parent for v in net.vessels}
    for vid in ids:
        seen = set()
        cur = vid
        while cur is not None:
            if cur in seen:
                raise TopologyError(f"cycle through vessel {vid}")
            seen.add(cur)
            cur = parent[cur]
    has_kids = {v.parent for v in net.vessels if v.parent is not None}
    for v in net.vessels:
        if v.id not in has_kids and not v.terminal:
            raise TopologyError(f"leaf vessel {v.id} is not flagged terminal")
        if v.id in has_kids and v.terminal:
            raise TopologyError(f"vessel {v.id} is flagged terminal but has daughters")


def _vessel_from_dict(d: dict, n2_default: float) -> Vessel:
    try:
        ov = d.get("overrides") or {}
        return Vessel(
            id=int(d["id"]),
            name=str(d.get("name", f"vessel {d['id']}")),
            length=float(d["length_cm"]),
            r_in=float(d["r_in_cm"]),
            r_out=float(d["r_out_cm"]),
            parent=None if d.get("parent") is None else int(d["parent"]),
            orientation=d.get("orientation"),
            terminal=bool(d.get("terminal", False)),
            k3=None if ov.get("k3") is None else float(ov["k3"]),
            r_min=None if ov.get("r_min") is None else float(ov["r_min"]),
            n2=float(d.get("taper_n2", n2_default)),
        )
    except KeyError as exc:
        raise NetworkError(f"vessel entry missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(f"bad vessel entry {d!r}: {exc}") from None


def network_from_dict(data: dict) -> VesselNetwork:
    if not isinstance(data, dict) or "vessels" not in data:
        raise NetworkError("network must be an object with a 'vessels' list")
    fluid = data.get("fluid", {})
    stiff = data.get("stiffness", {})
    n2 = float(data.get("taper", {}).get("n2", TAPER_N2_DEFAULT))
    for v in data["vessels"]:
        if v.get("orientation") not in (None, *ORIENTATION_ANGLES):
            raise NetworkError(f"vessel {v.get('id')}: bad orientation {v['orientation']!r}")
    vessels = [_vessel_from_dict(v, n2) for v in data["vessels"]]
    net = VesselNetwork(
        vessels=tuple(vessels),
        k1=float(stiff.get("k1", K1_DEFAULT)),
        k2=float(stiff.get("k2", K2_DEFAULT)),
        k3=float(stiff.get("k3", K3_DEFAULT)),
        k2_convention=stiff.get("k2_convention", "decaying"),
        rho=float(fluid.get("rho", RHO_DEFAULT)),
        mu=float(fluid.get("mu", MU_DEFAULT)),
        g=float(fluid.get("g", G_DEFAULT)),
        p0=(float(fluid["p0_mmHg"]) * MMHG if "p0_mmHg" in fluid else float(fluid.get("p0", 0.0))),
    )
    for v in net.vessels:
        if v.expanding:
            warnings.warn(f"vessel {v.id} widens along its length "
                          f"(r_in={v.r_in:g} < r_out={v.r_out:g}); expanding taper", stacklevel=2)
    return net


def load_network(path) -> VesselNetwork:
    """Read and validate a network JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: malformed JSON ({exc})") from None
    return network_from_dict(data)


def network_to_dict(net: VesselNetwork) -> dict:
    vessels = []
    for v in net.vessels:
        entry = {
            "id": v.id, "name": v.name, "length_cm": v.length,
            "r_in_cm": v.r_in, "r_out_cm": v.r_out, "parent": v.parent,
            "orientation": v.orientation, "terminal": v.terminal,
            "overrides": {k: val for k, val in (("k3", v.k3), ("r_min", v.r_min))
                          if val is not None},
            "taper_n2": v.n2,
        }
        vessels.append(entry)
    return {
        "fluid": {"rho": net.rho, "mu": net.mu, "g": net.g, "p0": net.p0},
        "stiffness": {"k1": net.k1, "k2": net.k2, "k3": net.k3,
                      "k2_convention": net.k2_convention},
        "vessels": vessels,
    }


def save_network(net: VesselNetwork, path):
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1))


@dataclass(frozen=True)
class PatientScaling:
    """Weights for allometric length scaling."""

    w_literature: float
    w_patient: float
    exponent: float = 0.35

    def __post_init__(self):
        if self.w_literature <= 0 or self.w_patient <= 0:
            raise ValueError("weights must be positive")
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")


def allometric_scale(length: float, scaling: PatientScaling,
                     invert_allometric_ratio: bool = False) -> float:
    """Scale a literature length to the patient: ``L1 (W1/W2)**alpha``.

    With ``invert_allometric_ratio`` the ratio is taken as ``W2/W1``.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    ratio = scaling.w_literature / scaling.w_patient
    if invert_allometric_ratio:
        ratio = 1.0 / ratio
    return length * ratio**scaling.exponent


def scale_vessels(net: VesselNetwork, scaling: PatientScaling, ids,
                  radii: bool = False, invert_allometric_ratio: bool = False) -> VesselNetwork:
    """Allometrically rescale lengths (and optionally radii) of vessels ``ids``."""
    ids = set(ids)
    out = []
    for v in net.vessels:
        if v.id in ids:
            kw = {"length": allometric_scale(v.length, scaling, invert_allometric_ratio)}
            if radii:
                kw["r_in"] = allometric_scale(v.r_in, scaling, invert_allometric_ratio)
                kw["r_out"] = allometric_scale(v.r_out, scaling, invert_allometric_ratio)
            v = dataclasses.replace(v, **kw)
        out.append(v)
    return net.replace_vessels(out)


def match_inlet_radii(net: VesselNetwork, ids) -> VesselNetwork:
    """Set the inlet radius of each vessel in ``ids`` to its parent's outlet radius."""
    ids = set(ids)
    out = []
    for v in net.vessels:
        if v.id in ids and v.parent is not None:
            v = dataclasses.replace(v, r_in=net[v.parent].r_out)
        out.append(v)
    return net.replace_vessels(out)


@dataclass(frozen=True)
class TaperFit:
    n1: float
    n2: float
    n3: float
    residual: float
    converged: bool
    iterations: int


def fit_taper(samples, tol: float = 1e-10, max_iter: int = 200) -> TaperFit:
    """Least-squares fit of ``r = n1 exp(-n2 x) + n3`` to ``(x, r)`` samples.

    Bounded trust-region least squares started from a log-linear estimate of
    the decay rate; ``n1`` and ``n2`` are kept non-negative.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least three (x, r) samples")
    x, r = pts[:, 0], pts[:, 1]
    if np.any(r <= 0):
        raise ValueError("radii must be positive")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    if np.ptp(r) <= 1e-12 * np.max(r):
        return TaperFit(0.0, 0.0, float(np.mean(r)), 0.0, True, 0)

    span = x[-1] - x[0]
    drop = r - r[-1]
    use = drop > 1e-6 * np.max(np.abs(drop))
    if use.sum() >= 2:
        slope = np.polyfit(x[use], np.log(drop[use]), 1)[0]
        n2 = max(-slope, 1e-3 / span)
    else:
        n2 = 1.0 / span

    def linear_part(rate):
        basis = np.column_stack([np.exp(-rate * x), np.ones_like(x)])
        (a, b), *_ = np.linalg.lstsq(basis, r, rcond=None)
        return max(a, 0.0), b

    n1, n3 = linear_part(n2)

    def resid(th):
        return th[0] * np.exp(-th[1] * x) + th[2] - r

    def jac(th):
        e = np.exp(-th[1] * x)
        return np.column_stack([e, -th[0] * x * e, np.ones_like(x)])

    sol = least_squares(resid, np.array([n1, n2, n3]), jac=jac,
                        bounds=([0.0, 0.0, -np.inf], [np.inf, np.inf, np.inf]),
                        xtol=tol, ftol=tol, gtol=tol, max_nfev=max_iter)
    n1, n2, n3 = sol.x
    return TaperFit(float(n1), float(n2), float(n3), float(np.linalg.norm(sol.fun)),
                    bool(sol.status > 0), int(sol.nfev))


def gravity_cosine(theta: float) -> float:
    """cos(theta) with the horizontal case returned as exactly zero."""
    c = math.cos(theta)
    return 0.0 if abs(c) < 1e-12 else c


def assign_gravity_angles(net: VesselNetwork, posture: str) -> VesselNetwork:
    """Return a copy with gravity angles set for ``posture``.

    Supine puts every vessel at pi/2. Upright maps orientation labels
    ``up`` to -pi, ``down`` to 0 and ``horizontal`` to pi/2.
    """
    if posture not in POSTURES:
        raise ValueError(f"unknown posture {posture!r}")
    out = []
    for v in net.vessels:
        if posture == "supine":
            theta = math.pi / 2
        else:
            if v.orientation not in ORIENTATION_ANGLES:
                raise NetworkError(f"vessel {v.id} has no orientation label for upright posture")
            theta = ORIENTATION_ANGLES[v.orientation]
        out.append(dataclasses.replace(v, theta=theta))
    return dataclasses.replace(net, vessels=tuple(out), posture=posture)
