import json
import math

import numpy as np
import pytest

from hemo1d.network import (NetworkError, PatientScaling, TopologyError, Vessel, VesselNetwork,
                            allometric_scale, assign_gravity_angles, fit_taper, gravity_cosine,
                            load_network, match_inlet_radii, network_from_dict, network_to_dict,
                            radius_at, radius_slope, save_network, scale_vessels)
from hemo1d.presets import REGIONS, TOPOLOGY, patient_network


def y_network(**kw):
    vs = (Vessel(1, "p", 4.0, 1.2, 1.1, None, "up"),
          Vessel(2, "d1", 2.0, 1.1, 1.1, 1, "horizontal", True),
          Vessel(3, "d2", 1.2, 0.57, 0.49, 1, "up", True))
    return VesselNetwork(vs, **kw)


def test_taper_passes_through_end_radii():
    v = Vessel(1, "v", 15.17, 0.88, 0.70)
    assert radius_at(v, 0.0) == pytest.approx(0.88, rel=1e-14)
    assert radius_at(v, v.length) == pytest.approx(0.70, rel=1e-13)
    x = np.linspace(0, v.length, 11)
    h = 1e-6
    fd = (radius_at(v, x[1:-1] + h) - radius_at(v, x[1:-1] - h)) / (2 * h)
    assert np.allclose(radius_slope(v, x[1:-1]), fd, rtol=1e-7)


def test_uniform_and_linear_limits():
    v = Vessel(1, "v", 3.0, 0.4, 0.4)
    assert np.all(radius_at(v, np.linspace(0, 3, 5)) == 0.4)
    w = Vessel(1, "v", 3.0, 0.4, 0.3, n2=0.0)
    assert radius_at(w, 1.5) == pytest.approx(0.35)


def test_validation_errors():
    with pytest.raises(NetworkError):
        Vessel(1, "bad", -1.0, 0.2, 0.2)
    base = [Vessel(1, "a", 1.0, 0.5, 0.5), Vessel(2, "b", 1.0, 0.3, 0.3, 1, terminal=True)]
    with pytest.raises(TopologyError):
        VesselNetwork(tuple(base + [Vessel(3, "c", 1.0, 0.3, 0.3, None, terminal=True)]))
    with pytest.raises(TopologyError):
        VesselNetwork(tuple(base + [Vessel(3, "c", 1.0, 0.3, 0.3, 9, terminal=True)]))
    with pytest.raises(TopologyError):
        VesselNetwork((Vessel(1, "a", 1.0, 0.5, 0.5), Vessel(2, "b", 1.0, 0.3, 0.3, 1)))
    with pytest.raises(TopologyError):
        VesselNetwork((Vessel(1, "a", 1.0, 0.5, 0.5, terminal=True),
                       Vessel(2, "b", 1.0, 0.3, 0.3, 1, terminal=True)))


def test_json_roundtrip(tmp_path):
    net = y_network(p0=70 * 1333.22)
    path = tmp_path / "net.json"
    save_network(net, path)
    back = load_network(path)
    assert back == net
    assert network_to_dict(back) == network_to_dict(net)


def test_expanding_taper_warns():
    d = network_to_dict(y_network())
    d["vessels"][1]["r_out_cm"] = 1.3
    with pytest.warns(UserWarning, match="expanding"):
        network_from_dict(d)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(NetworkError):
        load_network(p)


def test_allometric_scaling():
    s = PatientScaling(70.0, 59.6)
    assert allometric_scale(10.0, s) == pytest.approx(10.0 * (70 / 59.6) ** 0.35)
    assert allometric_scale(10.0, s, invert_allometric_ratio=True) == pytest.approx(
        10.0 * (59.6 / 70) ** 0.35)
    net = scale_vessels(y_network(), s, [2])
    assert net[2].length == pytest.approx(2.0 * (70 / 59.6) ** 0.35)
    assert net[3].length == 1.2
    net = match_inlet_radii(net, [3])
    assert net[3].r_in == net[1].r_out


def test_fit_taper_recovers_parameters():
    x = np.linspace(0, 12, 25)
    r = 0.25 * np.exp(-0.15 * x) + 0.4
    fit = fit_taper(np.column_stack([x, r]))
    assert fit.converged
    assert (fit.n1, fit.n2, fit.n3) == pytest.approx((0.25, 0.15, 0.4), rel=1e-6)
    flat = fit_taper(np.column_stack([x, np.full_like(x, 0.3)]))
    assert (flat.n1, flat.n2) == (0.0, 0.0)


def test_gravity_angles():
    assert gravity_cosine(math.pi / 2) == 0.0
    up = assign_gravity_angles(y_network(), "upright")
    assert up[1].theta == -math.pi and up[2].theta == math.pi / 2
    sup = assign_gravity_angles(up, "supine")
    assert all(v.theta == math.pi / 2 for v in sup.vessels)
    bare = VesselNetwork((Vessel(1, "a", 1.0, 0.5, 0.5, terminal=True),))
    with pytest.raises(NetworkError):
        assign_gravity_angles(bare, "upright")


def test_patient_network_structure():
    net = patient_network("dorv")
    assert len(net) == 57
    assert net.root == 1
    assert len(net.terminals) == 27
    covered = sorted(v for ids in REGIONS.values() for v in ids)
    assert covered == sorted(net.terminals)
    assert set(TOPOLOGY) == set(net.ids)
    # geometry spot checks
    assert (net[1].length, net[1].r_in, net[1].r_out) == (4.07, 1.20, 1.10)
    assert (net[50].length, net[50].r_in) == (43.09, 0.21)


def test_shipped_network_files_load():
    from importlib.resources import files
    for name in ("dorv_network.json", "hlhs_network.json"):
        d = json.loads(files("hemo1d").joinpath("data", name).read_text())
        net = network_from_dict(d)
        assert len(net) == 57
