import json

import pytest

from hemo1d.config import TREE_DEFAULTS, ConfigError, apply_parameters, config_from_dict, parse_config
from hemo1d.network import load_network


def test_defaults(small_case):
    cfg = parse_config(small_case / "config.json")
    assert cfg.parameters == {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5, "r_min": 0.01,
                              "alpha": 0.90, "beta": 0.60, "lrr": 50.0}
    assert cfg.parameters is not TREE_DEFAULTS
    assert cfg.posture == "supine" and not cfg.exercise.enabled
    assert cfg.network == small_case / "net.json"
    assert cfg.output == small_case / "out"


def test_overrides_applied(small_case):
    d = json.loads((small_case / "config.json").read_text())
    d["overrides"] = [{"vessels": [1, 2], "k3": 5.7e5}, {"vessels": [3], "r_min": 0.03}]
    d["parameters"] = {"k1": 3.0e6}
    cfg = config_from_dict(d, base=small_case)
    net = apply_parameters(load_network(cfg.network), cfg)
    assert net.k1 == 3.0e6
    assert net[1].k3 == 5.7e5 and net[2].k3 == 5.7e5 and net[3].k3 is None
    assert net[3].r_min == 0.03


@pytest.mark.parametrize("patch, path", [
    ({"overrides": [{"vessels": [99], "k3": 1.0}]}, "config.overrides[0].vessels"),
    ({"overrides": [{"vessels": [1], "k4": 1.0}]}, "config.overrides[0].k4"),
    ({"parameters": {"k3": -1.0}}, "config.parameters.k3"),
    ({"parameters": {"alpha": 0.5}}, "config.parameters"),
    ({"posture": "sideways"}, "config.posture"),
    ({"grid": {"dz": 1}}, "config.grid.dz"),
    ({"exercise": {"flow_factor": "x"}}, "config.exercise.flow_factor"),
    ({"inflow": "nope.csv"}, "config.inflow"),
    ({"wia_vessels": [7]}, "config.wia_vessels"),
    ({"colour": "red"}, "config.colour"),
])
def test_errors_name_the_field(small_case, patch, path):
    d = json.loads((small_case / "config.json").read_text())
    d.update(patch)
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d, base=small_case)
    assert str(exc.value).startswith(path)


def test_missing_network(small_case):
    with pytest.raises(ConfigError, match="config.network"):
        config_from_dict({"inflow": "inflow.csv"}, base=small_case)


def test_digest_ignores_output_and_workers(small_case):
    d = json.loads((small_case / "config.json").read_text())
    a = config_from_dict(d, base=small_case)
    b = config_from_dict({**d, "output": "elsewhere", "workers": 3}, base=small_case)
    c = config_from_dict({**d, "posture": "upright"}, base=small_case)
    assert a.digest() == b.digest() != c.digest()


def test_packaged_configs_parse():
    from importlib.resources import files
    for patient in ("dorv", "hlhs"):
        cfg = parse_config(files("hemo1d").joinpath("data", f"{patient}_config.json"))
        net = apply_parameters(load_network(cfg.network), cfg)
        assert len(net) == 57 and net.p0 > 0
