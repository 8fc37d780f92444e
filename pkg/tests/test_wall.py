import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hemo1d.wall import (MMHG, WallLaw, area_from_pressure, compliance_at_reference,
                         effective_k2, pressure_from_area, stiffness, stiffness_slope,
                         wave_speed_reference)


def test_stiffness_nominal_values():
    # large radius: the exponential term has died out
    assert stiffness(1.2) == pytest.approx(3.8e5 + 2e6 * math.exp(-42.0), rel=1e-14)
    assert stiffness(0.01) == pytest.approx(2e6 * math.exp(-0.35) + 3.8e5, rel=1e-14)


def test_k2_conventions():
    assert effective_k2(-35.0) == 35.0
    assert effective_k2(-35.0, "literal") == -35.0
    with pytest.raises(ValueError):
        effective_k2(1.0, "other")
    # stiffness decreases with radius under the decaying convention
    r = np.linspace(0.05, 1.5, 50)
    assert np.all(np.diff(stiffness(r)) <= 0)
    assert np.all(np.diff(stiffness(r[:20])) < 0)


def test_stiffness_slope_matches_finite_difference():
    r, h = 0.23, 1e-6
    fd = (stiffness(r + h) - stiffness(r - h)) / (2 * h)
    assert stiffness_slope(r) == pytest.approx(fd, rel=1e-7)


def test_reference_state_gives_reference_pressure():
    law = WallLaw.from_constants(0.5, p0=80 * MMHG)
    assert pressure_from_area(law.a0, law) == law.p0


@settings(max_examples=200, deadline=None)
@given(r0=st.floats(0.02, 1.5), frac=st.floats(-3.0, 0.95))
def test_area_pressure_roundtrip(r0, frac):
    law = WallLaw.from_constants(r0)
    p = frac * law.beta
    a = area_from_pressure(p, law)
    assert pressure_from_area(a, law) == pytest.approx(p, rel=1e-10, abs=1e-9 * law.beta)


def test_asymptote_rejected():
    law = WallLaw.from_constants(0.3)
    with pytest.raises(ValueError):
        area_from_pressure(law.beta, law)
    with pytest.raises(ValueError):
        pressure_from_area(-1.0, law)


def test_compliance_finite_difference():
    law = WallLaw.from_constants(0.4)
    h = 1e-5 * law.beta
    fd = (area_from_pressure(h, law) - area_from_pressure(-h, law)) / (2 * h)
    assert compliance_at_reference(law) == pytest.approx(fd, rel=1e-6)


def test_wave_speed_reference_from_compliance():
    law = WallLaw.from_constants(0.4)
    rho = 1.057
    c = math.sqrt(law.a0 / (rho * compliance_at_reference(law)))
    assert wave_speed_reference(law, rho) == pytest.approx(c, rel=1e-14)
