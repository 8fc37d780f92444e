import json
from importlib.resources import files

import pytest
from hypothesis import given, settings, strategies as st

from hemo1d.flows import (FlowScalingError, MeasuredFlowSet, Plane, flow_set_from_dict,
                          scale_measured_flows)


def dorv():
    return flow_set_from_dict(json.loads(files("hemo1d").joinpath("data", "dorv_flows.json").read_text()))


def test_dorv_table_values():
    s = scale_measured_flows(dorv())
    assert s["Asc. Aorta"] == pytest.approx(4.06, abs=1e-12)
    # the measured table rounds to 0.75; 4.06 - 3.32 = 0.74
    assert s["Brachiocephalic"] == pytest.approx(0.75, abs=0.015)
    assert s["L Comm. Carotid"] == pytest.approx(0.19, abs=0.005)
    assert s["L Subclavian"] == pytest.approx(0.50, abs=0.015)
    assert s.factors["Asc. Aorta"] == pytest.approx(4.06 / 4.14)


def test_exactly_conservative():
    s = scale_measured_flows(dorv())
    for name, r in s.junction_residuals().items():
        assert abs(r) < 1e-12, name


def test_identity_on_conservative_set():
    fs = MeasuredFlowSet([Plane("in", 5.0), Plane("trunk", 3.0, "in"),
                          Plane("b1", 1.5, "in", "branch"), Plane("b2", 0.5, "in", "branch")])
    s = scale_measured_flows(fs)
    assert all(v == pytest.approx(1.0, rel=1e-15) for v in s.factors.values())


def test_infeasible_and_invalid():
    fs = MeasuredFlowSet([Plane("in", 5.0), Plane("trunk", 6.0, "in"),
                          Plane("b", 1.0, "in", "branch")], targets={"trunk": 6.0})
    with pytest.raises(FlowScalingError):
        scale_measured_flows(fs)
    with pytest.raises(FlowScalingError):
        MeasuredFlowSet([Plane("in", -1.0)])
    with pytest.raises(FlowScalingError):
        MeasuredFlowSet([Plane("in", 1.0), Plane("x", 1.0, "nowhere")])
    with pytest.raises(FlowScalingError):
        MeasuredFlowSet([Plane("a", 1.0, "b"), Plane("b", 1.0, "a"), Plane("r", 1.0)])


@settings(max_examples=100, deadline=None)
@given(inflow=st.floats(0.5, 10), data=st.lists(st.floats(0.01, 5), min_size=5, max_size=5))
def test_random_sets_become_conservative(inflow, data):
    fs = MeasuredFlowSet([Plane("in", inflow), Plane("t1", data[0], "in"),
                          Plane("b1", data[1], "in", "branch"), Plane("t2", data[2], "t1"),
                          Plane("b2", data[3], "t1", "branch"), Plane("b3", data[4], "t1", "branch")])
    s = scale_measured_flows(fs)
    for name, r in s.junction_residuals().items():
        assert abs(r) < 1e-12
    assert all(p.flow >= 0 for p in s.planes)
    assert s["t1"] <= s["in"] and s["t2"] <= s["t1"]
