import json

import numpy as np
import pytest

from hemo1d.waveform import synthetic_inflow


def small_network_dict():
    """Three-vessel Y used by the CLI and config tests."""
    return {
        "fluid": {"rho": 1.057, "mu": 0.032, "g": 981.0, "p0_mmHg": 65.0},
        "stiffness": {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5},
        "vessels": [
            {"id": 1, "name": "trunk", "length_cm": 6.0, "r_in_cm": 0.6, "r_out_cm": 0.55,
             "parent": None, "orientation": "down"},
            {"id": 2, "name": "left", "length_cm": 4.0, "r_in_cm": 0.4, "r_out_cm": 0.35,
             "parent": 1, "orientation": "down", "terminal": True},
            {"id": 3, "name": "right", "length_cm": 4.0, "r_in_cm": 0.4, "r_out_cm": 0.35,
             "parent": 1, "orientation": "horizontal", "terminal": True},
        ],
    }


@pytest.fixture
def small_case(tmp_path):
    """Network, inflow and config files for a quick run, in ``tmp_path``."""
    (tmp_path / "net.json").write_text(json.dumps(small_network_dict()))
    synthetic_inflow(20.0, 0.8, n=128).to_csv(tmp_path / "inflow.csv")
    cfg = {"network": "net.json", "inflow": "inflow.csv", "output": "out",
           "grid": {"dx": 0.25, "max_cycles": 3}, "wia_vessels": [1]}
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    return tmp_path
