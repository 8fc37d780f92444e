"""Linear elastic wall law for compliant arteries.

The wall is modeled as a thin membrane whose composite stiffness ``Eh/r0``
depends on the reference radius through an exponential law. All functions
work on scalars or numpy arrays and use CGS units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MMHG = 1333.22  # g/cm/s^2 per mmHg

# Nominal stiffness constants, CGS.
K1_DEFAULT = 2.0e6
K2_DEFAULT = -35.0
K3_DEFAULT = 3.8e5


def effective_k2(k2: float, convention: str = "decaying") -> float:
    """Return the rate used in ``exp(-rate * r0)``.

    ``"decaying"`` uses ``|k2|`` so stiffness falls off with radius whatever
    sign the table lists; ``"literal"`` uses ``k2`` as given.
    """
    if convention == "decaying":
        return abs(k2)
    if convention == "literal":
        return k2
    raise ValueError(f"unknown k2 convention {convention!r}")


def stiffness(r0, k1=K1_DEFAULT, k2=K2_DEFAULT, k3=K3_DEFAULT, convention="decaying"):
    """Composite wall stiffness ``Eh/r0`` (g/cm/s^2) at reference radius ``r0``."""
    r0 = np.asarray(r0, dtype=float)
    if np.any(r0 <= 0):
        raise ValueError("reference radius must be positive")
    rate = effective_k2(k2, convention)
    out = k1 * np.exp(-rate * r0) + k3
    return out if out.ndim else float(out)


def stiffness_slope(r0, k1=K1_DEFAULT, k2=K2_DEFAULT, k3=K3_DEFAULT, convention="decaying"):
    """Derivative of ``Eh/r0`` with respect to ``r0``."""
    r0 = np.asarray(r0, dtype=float)
    rate = effective_k2(k2, convention)
    out = -rate * k1 * np.exp(-rate * r0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WallLaw:
    """Pressure-area law of one cross-section.

    Attributes
    ----------
    r0 : float
        Reference radius (cm).
    ehr : float
        Composite stiffness ``Eh/r0`` (g/cm/s^2).
    p0 : float
        Reference pressure (g/cm/s^2).
    """

    r0: float
    ehr: float
    p0: float = 0.0

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")
        if self.ehr <= 0:
            raise ValueError("Eh/r0 must be positive")

    @classmethod
    def from_constants(cls, r0, k1=K1_DEFAULT, k2=K2_DEFAULT, k3=K3_DEFAULT,
                       p0=0.0, convention="decaying"):
        return cls(r0=float(r0), ehr=stiffness(r0, k1, k2, k3, convention), p0=p0)

    @property
    def a0(self) -> float:
        return np.pi * self.r0**2

    @property
    def beta(self) -> float:
        # (4/3) Eh/r0, the pressure scale of the law
        return 4.0 * self.ehr / 3.0


def pressure_from_area(area, law: WallLaw):
    """Transmural pressure for cross-sectional area ``area``."""
    area = np.asarray(area, dtype=float)
    if np.any(area <= 0):
        raise ValueError("area must be positive")
    out = law.p0 + law.beta * (1.0 - np.sqrt(law.a0 / area))
    return out if out.ndim else float(out)


def area_from_pressure(p, law: WallLaw):
    """Exact inverse of :func:`pressure_from_area`.

    Raises
    ------
    ValueError
        If ``p`` reaches the asymptote ``p0 + (4/3) Eh/r0``.
    """
    p = np.asarray(p, dtype=float)
    s = 1.0 - (p - law.p0) / law.beta
    if np.any(s <= 0):
        raise ValueError("pressure at or above the wall-law asymptote")
    out = law.a0 / s**2
    return out if out.ndim else float(out)


def compliance_at_reference(law: WallLaw) -> float:
    """dA/dp at A = A0 (cm^4 s^2/g)."""
    return 1.5 * law.a0 / law.ehr


def wave_speed_reference(law: WallLaw, rho: float) -> float:
    """Linearized pulse wave speed at the reference state (cm/s)."""
    return float(np.sqrt(2.0 * law.ehr / (3.0 * rho)))
