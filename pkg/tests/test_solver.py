import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hemo1d.network import Vessel, VesselNetwork
from hemo1d.solver import (GridConfig, SimulationError, boundary_layer_thickness, resolve_grid,
                           run_simulation)
from hemo1d.structured_tree import StructuredTreeSpec, root_impedance_spectrum
from hemo1d.wall import MMHG, WallLaw, wave_speed_reference
from hemo1d.waveform import Waveform

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


def single(length=10.0, r_in=0.5, r_out=None, **kw):
    v = Vessel(1, "v", length, r_in, r_in if r_out is None else r_out, None, "horizontal", True)
    return VesselNetwork((v,), **kw)


def constant(value, period, n=8):
    t = np.linspace(0.0, period, n + 1)
    return Waveform(t, np.full(n + 1, float(value)))


def matched_resistance(net, vid=1):
    v = net[vid]
    law = WallLaw(v.r_out, net.stiffness_at(vid, v.r_out))
    return net.rho * wave_speed_reference(law, net.rho) / law.a0


def y_network(**kw):
    vs = (Vessel(1, "Ascending aorta", 4.07, 1.20, 1.10, None, "up"),
          Vessel(2, "Aortic arch I", 1.95, 1.10, 1.10, 1, "horizontal", True),
          Vessel(3, "Brachiocephalic", 1.23, 0.57, 0.49, 1, "up", True))
    return VesselNetwork(vs, **kw)


def test_rest_state_is_exact_equilibrium():
    net = single(p0=70 * MMHG)
    res = run_simulation(net, constant(0.0, 0.5), GridConfig(max_cycles=2), trees={1: 900.0})
    s = res[1]
    assert np.all(s.q == 0.0)
    assert np.all(s.A == math.pi * 0.25)
    assert np.all(s.p == 70.0)
    assert res.converged


def test_steady_flow_matches_ode_oracle():
    T, qbar, L, r = 0.5, 10.0, 20.0, 0.5
    net = single(L, r)
    R = matched_resistance(net)
    res = run_simulation(net, constant(qbar, T), GridConfig(dx=0.1, max_cycles=40, tol=1e-9),
                         trees={1: R})
    assert res.converged
    f = 4.0 / 3.0 * net.stiffness_at(1, r)
    a0, nu, rho = math.pi * r * r, net.nu, net.rho
    delta = boundary_layer_thickness(nu, T)

    def rhs(x, y):
        A = y[0]
        dpdA = 0.5 * f * math.sqrt(a0) * A**-1.5
        fric = -2 * math.pi * nu * math.sqrt(A / math.pi) * qbar / (delta * A)
        return [fric / (-qbar**2 / A**2 + A / rho * dpdA)]

    AL = a0 / (1 - R * qbar / f) ** 2
    sol = solve_ivp(rhs, [L, 0.0], [AL], rtol=1e-12, atol=1e-14, dense_output=True)
    p_ode = f * (1 - np.sqrt(a0 / sol.sol(res[1].x)[0])) / MMHG
    p_sim = res[1].p[:, -1]
    drop_sim, drop_ode = p_sim[0] - p_sim[-1], p_ode[0] - p_ode[-1]
    assert drop_sim == pytest.approx(drop_ode, rel=0.01)
    assert np.allclose(res[1].q, qbar, rtol=1e-6)


def test_pulse_travels_at_reference_wave_speed():
    L, T = 100.0, 0.4
    net = single(L, 0.5)
    t = np.linspace(0, T, 513)
    q = np.exp(-((t - 0.05) / 0.01) ** 2)
    q[-1] = q[0]
    res = run_simulation(net, Waveform(t, q), GridConfig(max_cycles=1),
                         trees={1: matched_resistance(net)})
    s = res[1]
    h = res.t[1] - res.t[0]

    def peak(y):
        k = int(np.argmax(y))
        a, b, c = y[k - 1], y[k], y[k + 1]
        return (k + 0.5 * (a - c) / (a - 2 * b + c)) * h

    speed = (L / 2) / (peak(s.p[1]) - peak(s.p[0]))
    c0 = wave_speed_reference(WallLaw(0.5, net.stiffness_at(1, 0.5)), net.rho)
    assert speed == pytest.approx(c0, rel=0.02)


def test_outlet_convolution_reproduces_tree_impedance():
    T, k = 0.658, 3
    net = single(10.0, 0.3)
    t = np.linspace(0, T, 1025)
    wf = Waveform(t, 5 + 2 * np.sin(2 * np.pi * k * t / T))
    res = run_simulation(net, wf, GridConfig(max_cycles=40, tol=1e-6))
    assert res.converged
    sp = root_impedance_spectrum(StructuredTreeSpec(r_root=0.3), T, res.grid["n_samples"])
    s = res[1]
    P = np.fft.rfft(s.p[2] * MMHG - net.p0)
    Q = np.fft.rfft(s.q[2])
    assert P[0] / Q[0] == pytest.approx(sp.Z[0], rel=1e-6)
    ratio = P[k] / Q[k]
    assert abs(ratio) == pytest.approx(abs(sp.Z[k]), rel=0.01)
    assert abs(np.angle(ratio) - np.angle(sp.Z[k])) < 0.01


def test_pure_resistance_dc_limit():
    net = single(5.0, 0.4)
    res = run_simulation(net, constant(8.0, 0.5), GridConfig(max_cycles=60, tol=1e-10),
                         trees={1: 2000.0})
    assert res[1].p[2, -1] * MMHG == pytest.approx(2000.0 * 8.0, rel=1e-8)


def test_second_order_convergence():
    T = 0.25
    t = np.linspace(0, T, 257)
    q = 5 * np.exp(-((t - 0.06) / 0.015) ** 2)
    q[-1] = q[0]
    wf = Waveform(t, q)
    net = single(10.0, 0.5, 0.45)
    runs = [run_simulation(net, wf, GridConfig(dx=0.2 / 2**lev, n_samples=2048 * 2**lev,
                                               max_cycles=1), trees={1: 800.0})[1]
            for lev in (0, 1, 3)]
    ref = runs[-1]
    err = [np.sqrt(np.mean((r.p - ref.p) ** 2)) for r in runs[:2]]
    order = math.log2(err[0] / err[1])
    assert 1.7 <= order <= 2.3


def test_symmetric_junction_splits_evenly():
    vs = (Vessel(1, "p", 5.0, 0.6, 0.6, None, "up"),
          Vessel(2, "a", 5.0, 0.4, 0.4, 1, "up", True),
          Vessel(3, "b", 5.0, 0.4, 0.4, 1, "up", True))
    net = VesselNetwork(vs)
    T = 0.6
    t = np.linspace(0, T, 257)
    wf = Waveform(t, 20 + 10 * np.sin(2 * np.pi * t / T))
    res = run_simulation(net, wf, GridConfig(max_cycles=3), trees={2: 3000.0, 3: 3000.0})
    assert np.array_equal(res[2].q, res[3].q)
    assert np.allclose(res[2].q[0] + res[3].q[0], res[1].q[2], rtol=1e-9, atol=1e-9)


def test_y_junction_pressure_continuity():
    net = y_network()
    T = 0.658
    t = np.linspace(0, T, 257)
    wf = Waveform(t, 60 + 50 * np.sin(2 * np.pi * t / T) ** 2)
    res = run_simulation(net, wf, GridConfig(max_cycles=2), trees={2: 1500.0, 3: 4000.0})
    assert res.audit["max_junction_flow_residual"] < 1e-10
    p_nd = res.nondim["pressure_g_cm_s2"]
    assert res.audit["max_junction_pressure_residual"] * p_nd / MMHG < 1e-8
    # the recorded end states agree as well
    assert np.allclose(res[1].p[2], res[2].p[0], rtol=0, atol=1e-8)
    assert np.allclose(res[1].p[2], res[3].p[0], rtol=0, atol=1e-8)


def test_mass_audit_single_vessel():
    net = single(15.0, 0.5, 0.4)
    T = 0.7
    t = np.linspace(0, T, 257)
    wf = Waveform(t, 30 + 25 * np.sin(2 * np.pi * t / T))
    res = run_simulation(net, wf, GridConfig(max_cycles=15, tol=1e-4))
    assert res.audit["volume_error_rel"] < 1e-3
    assert res.audit["inflow_volume_ml"] == pytest.approx(wf.mean() * T, rel=1e-6)


def test_inflow_is_imposed_at_root():
    T = 0.5
    t = np.linspace(0, T, 65)
    wf = Waveform(t, 10 + 5 * np.cos(2 * np.pi * t / T))
    res = run_simulation(single(), wf, GridConfig(max_cycles=1), trees={1: 900.0})
    assert np.allclose(res[1].q[0], wf(res.t), rtol=1e-12, atol=1e-12)


def test_supine_equals_zero_gravity_bitwise():
    net = y_network()
    t = np.linspace(0, 0.658, 257)
    wf = Waveform(t, 60 + 50 * np.sin(2 * np.pi * t / 0.658) ** 2)
    trees = {2: 1500.0, 3: 4000.0}
    a = run_simulation(net, wf, GridConfig(max_cycles=2), posture="supine", trees=trees)
    b = run_simulation(net.replace(g=0.0), wf, GridConfig(max_cycles=2), trees=trees)
    assert a.digest() == b.digest()


def test_upright_gravity_changes_flow_balance():
    net = y_network()
    t = np.linspace(0, 0.658, 257)
    wf = Waveform(t, 60 + 50 * np.sin(2 * np.pi * t / 0.658) ** 2)
    trees = {2: 1500.0, 3: 4000.0}
    sup = run_simulation(net, wf, GridConfig(max_cycles=2), posture="supine", trees=trees)
    up = run_simulation(net, wf, GridConfig(max_cycles=2), posture="upright", trees=trees)
    # gravity opposes flow into the upward brachiocephalic branch
    assert np.mean(up[3].q[1]) < np.mean(sup[3].q[1])


def test_grid_resolution_rules():
    net = y_network()
    rg = resolve_grid(net, 0.658, GridConfig(dx=0.1))
    assert all(n % 2 == 1 and n >= 9 for n in rg.npts.values())
    assert rg.dt <= rg.dt_cfl
    assert rg.dt * rg.n_samples == pytest.approx(0.658, rel=1e-15)
    assert rg.n_samples & (rg.n_samples - 1) == 0


def test_cfl_violation_is_reported():
    net = single(5.0, 0.5)
    with pytest.raises(SimulationError, match="CFL"):
        run_simulation(net, constant(10.0, 0.5), GridConfig(n_samples=64, max_cycles=1),
                       trees={1: 900.0})


def test_spectrum_period_mismatch_rejected():
    net = single()
    sp = root_impedance_spectrum(StructuredTreeSpec(r_root=0.5), 0.9, 1024)
    with pytest.raises(ValueError):
        run_simulation(net, constant(1.0, 0.5), GridConfig(max_cycles=1), trees={1: sp})


def test_deterministic_repeat():
    net = y_network()
    t = np.linspace(0, 0.658, 257)
    wf = Waveform(t, 60 + 50 * np.sin(2 * np.pi * t / 0.658) ** 2)
    trees = {2: StructuredTreeSpec(r_root=1.1, r_min=0.05), 3: 4000.0}
    a = run_simulation(net, wf, GridConfig(max_cycles=2), trees=trees, workers=1)
    b = run_simulation(net, wf, GridConfig(max_cycles=2), trees=trees, workers=2)
    assert a.digest() == b.digest()
