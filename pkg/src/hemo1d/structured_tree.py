"""Input impedance of asymmetric structured trees.

Each terminal large vessel is loaded with a self-similar binary tree of small
arteries. Daughters of a segment with radius ``r`` have radii ``alpha*r`` and
``beta*r``; a segment has length ``lrr*r``; recursion stops once a daughter
would fall below ``r_min``. Flow in every segment obeys the linearized,
frequency-domain equations with a Womersley velocity profile, so the root
impedance follows from a transmission-line recursion.

Frequencies follow the numpy FFT convention: time dependence ``exp(+i w t)``,
``w_k = 2 pi k / T`` for ``k = 0 .. N/2``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .wall import K1_DEFAULT, K2_DEFAULT, K3_DEFAULT, stiffness

log = logging.getLogger(__name__)

RHO_DEFAULT = 1.057
MU_DEFAULT = 0.032

# |w0| beyond which the Hankel expansion replaces the Bessel ratio; with
# 14 terms the relative error there is below 1e-15.
_ASYMPTOTIC_SWITCH = 30.0
_HANKEL_TERMS = 14
_RESONANCE_TOL = 1e-14


class TreeDepthError(ValueError):
    """Raised when a tree would exceed the generation cap."""


@dataclass(frozen=True)
class StructuredTreeSpec:
    """Parameters of one structured tree (CGS units)."""

    r_root: float
    alpha: float = 0.90
    beta: float = 0.60
    r_min: float = 0.01
    lrr: float = 50.0
    rho: float = RHO_DEFAULT
    mu: float = MU_DEFAULT
    k1: float = K1_DEFAULT
    k2: float = K2_DEFAULT
    k3: float = K3_DEFAULT
    k2_convention: str = "decaying"
    max_generations: int = 60

    def __post_init__(self):
        if not 0 < self.beta <= self.alpha < 1:
            raise ValueError("scaling ratios must satisfy 0 < beta <= alpha < 1")
        if self.r_min <= 0 or self.lrr <= 0 or self.r_root <= 0:
            raise ValueError("r_root, r_min and lrr must be positive")
        if self.rho <= 0 or self.mu <= 0:
            raise ValueError("rho and mu must be positive")

    @property
    def nu(self) -> float:
        return self.mu / self.rho

    def radius(self, j: int, k: int) -> float:
        """Radius of a segment reached by ``j`` alpha-steps and ``k`` beta-steps."""
        return self.r_root * self.alpha**j * self.beta**k


@dataclass
class ImpedanceSpectrum:
    """Root impedance on the half spectrum plus its periodic impulse response.

    ``z`` is sampled at ``t_j = j T / N`` so that ``dt * sum(z_j q_{n-j})``
    is the periodic convolution with the impedance.
    """

    period: float
    n_samples: int
    omega: np.ndarray
    Z: np.ndarray
    z: np.ndarray = field(repr=False)
    flagged: list = field(default_factory=list)

    @property
    def dt(self) -> float:
        return self.period / self.n_samples

    @property
    def dc(self) -> float:
        return float(self.Z[0].real)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega_rad_s", "re_Z", "im_Z"])
            for om, zz in zip(self.omega, self.Z):
                w.writerow([repr(float(om)), repr(float(zz.real)), repr(float(zz.imag))])


def _hankel_ratio(w):
    """J1(w)/J0(w) for large |w| with Im w < 0, from the Hankel expansion."""

    def series(nu, terms=_HANKEL_TERMS):
        mu = 4 * nu * nu
        total = np.ones_like(w)
        coef = 1.0
        for k in range(1, terms):
            coef *= (mu - (2 * k - 1) ** 2) / (8.0 * k)
            total = total + (1j**k) * coef / w**k
        return total

    return -1j * series(1) / series(0)


def _bessel_ratio(w):
    """J1(w)/J0(w) by backward recurrence of the ratio continued fraction.

    J is the minimal solution of the three-term recurrence, so running
    ``R_n = w / (2n - w R_{n+1})`` downward from a depth well past ``|w|``
    is stable and accurate to rounding.
    """
    depth = int(np.max(np.abs(w))) + 40
    ratio = np.zeros_like(w)
    for n in range(depth, 0, -1):
        ratio = w / (2 * n - w * ratio)
    return ratio


def womersley_factor(r0, omega, nu):
    """Womersley profile factor ``F_J = 2 J1(w0) / (w0 J0(w0))``.

    ``w0**2 = -i r0**2 omega / nu``. Returns exactly 1 at ``omega = 0``.
    Accepts scalar or array ``omega``.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    om = np.asarray(omega, dtype=float)
    if np.any(om < 0):
        raise ValueError("omega must be non-negative")
    w = r0 * np.sqrt(om / nu) * np.exp(-0.25j * np.pi)
    out = np.ones(om.shape, dtype=complex)
    pos = om > 0
    big = pos & (np.abs(w) > _ASYMPTOTIC_SWITCH)
    mid = pos & ~big
    if np.any(mid):
        wm = w[mid]
        out[mid] = 2.0 * _bessel_ratio(wm) / wm
    if np.any(big):
        wb = w[big]
        out[big] = 2.0 * _hankel_ratio(wb) / wb
    return out if out.ndim else complex(out)


def _segment_constants(r0, spec):
    a0 = np.pi * r0**2
    ehr = stiffness(r0, spec.k1, spec.k2, spec.k3, spec.k2_convention)
    compliance = 1.5 * a0 / ehr
    return a0, compliance


def segment_impedance(z_out, r0, length, omega, spec: StructuredTreeSpec, flags=None):
    """Input impedance of one tree segment loaded by ``z_out``.

    Parameters
    ----------
    z_out : complex or ndarray
        Load at the distal end, one value per frequency.
    r0, length : float
        Segment radius and length (cm).
    omega : float or ndarray
        Angular frequencies (rad/s), non-negative.
    flags : list, optional
        Receives ``(r0, omega)`` tuples where a near-resonance was perturbed.
    """
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    zo = np.broadcast_to(np.asarray(z_out, dtype=complex), om.shape).copy()
    zin = np.empty_like(zo)
    if length == 0:
        zin[:] = zo
        return zin if np.ndim(omega) else complex(zin[0])

    dc = om == 0
    zin[dc] = zo[dc] + 8.0 * spec.mu * length / (np.pi * r0**4)

    pos = ~dc
    if np.any(pos):
        zin[pos] = _transfer(zo[pos], r0, length, om[pos], spec)
        den_bad = ~np.isfinite(zin[pos])
        if np.any(den_bad):
            idx = np.flatnonzero(pos)[den_bad]
            for i in idx:
                bumped = om[i] * (1.0 + 1e-9)
                zin[i] = _transfer(zo[i:i + 1], r0, length, np.array([bumped]), spec)[0]
                if flags is not None:
                    flags.append((r0, float(om[i])))
                log.warning("segment resonance at r0=%g omega=%g; perturbed", r0, om[i])
    return zin if np.ndim(omega) else complex(zin[0])


def _transfer(zo, r0, length, om, spec):
    a0, compliance = _segment_constants(r0, spec)
    one_minus_fj = 1.0 - womersley_factor(r0, om, spec.nu)
    c = np.sqrt(a0 * one_minus_fj / (spec.rho * compliance))
    g = np.sqrt(compliance * a0 * one_minus_fj / spec.rho)
    kl = om * length / c
    sn, cs = np.sin(kl), np.cos(kl)
    den = cs + 1j * g * zo * sn
    with np.errstate(over="ignore", invalid="ignore"):
        zin = (1j * sn / g + zo * cs) / den
        # sin/cos overflow for strongly damped segments; tan stays bounded
        over = ~np.isfinite(sn) | ~np.isfinite(cs)
        if np.any(over):
            t = np.tan(kl[over])
            zin[over] = (1j * t / g[over] + zo[over]) / (1.0 + 1j * g[over] * zo[over] * t)
    bad = np.abs(den) < _RESONANCE_TOL
    zin[bad & ~over] = np.nan
    return zin


def _parallel(z1, z2):
    # Z_term = 0 on either side shorts the junction
    out = np.zeros_like(z1)
    ok = (z1 != 0) & (z2 != 0)
    out[ok] = z1[ok] * z2[ok] / (z1[ok] + z2[ok])
    return out


def _tree_impedance(spec, omega, memoize=True, flags=None):
    memo = {}

    def node(j, k):
        if j + k > spec.max_generations:
            raise TreeDepthError(
                f"structured tree exceeds {spec.max_generations} generations "
                f"(r_min={spec.r_min}, alpha={spec.alpha}, beta={spec.beta})")
        if memoize and (j, k) in memo:
            return memo[(j, k)]
        r = spec.radius(j, k)
        if r < spec.r_min:
            res = None
        else:
            d1 = node(j + 1, k)
            d2 = node(j, k + 1)
            if d1 is None or d2 is None:
                load = np.zeros(omega.shape, dtype=complex)
            else:
                load = _parallel(d1, d2)
            res = segment_impedance(load, r, spec.lrr * r, omega, spec, flags)
        if memoize:
            memo[(j, k)] = res
        return res

    root = node(0, 0)
    if root is None:
        raise ValueError("root radius is below r_min; tree is empty")
    return root


def impulse_response(Z_half, period, n_samples):
    """Real periodic impulse response of a half spectrum.

    ``z = irfft(Z) / dt`` so that ``dt * sum(z) = Z[0]``.
    """
    dt = period / n_samples
    return np.fft.irfft(np.asarray(Z_half, dtype=complex), n=n_samples) / dt


def root_impedance_spectrum(spec: StructuredTreeSpec, period: float, n_samples: int,
                            memoize: bool = True) -> ImpedanceSpectrum:
    """Root impedance ``Z(0, w_k)`` of the tree and its impulse response.

    The Nyquist entry is stored as its real part, the value a real impulse
    response can carry.
    """
    if n_samples < 16 or n_samples % 2:
        raise ValueError("n_samples must be even and >= 16")
    if period <= 0:
        raise ValueError("period must be positive")
    omega = 2.0 * np.pi * np.arange(n_samples // 2 + 1) / period
    flags = []
    Z = _tree_impedance(spec, omega, memoize, flags)
    Z[-1] = Z[-1].real
    z = impulse_response(Z, period, n_samples)
    return ImpedanceSpectrum(period=period, n_samples=n_samples, omega=omega,
                             Z=Z, z=z, flagged=flags)


def count_segments(spec: StructuredTreeSpec) -> int:
    """Number of generated segments in the explicit (unmemoized) tree."""

    def walk(r, depth):
        if r < spec.r_min:
            return 0
        if depth > spec.max_generations:
            raise TreeDepthError("generation cap exceeded")
        return 1 + walk(r * spec.alpha, depth + 1) + walk(r * spec.beta, depth + 1)

    return walk(spec.r_root, 0)

