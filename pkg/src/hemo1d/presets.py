"""57-vessel systemic network for the DORV and HLHS patients.

Dimensions are the patient-scaled values (length, inlet radius, outlet
radius in cm). Connectivity is a rooted tree: the circle of Willis is opened
so that the basilar artery is fed by the right vertebral artery, the left
vertebral ends in a structured tree, and the communicating arteries are
terminal branches.
"""

from __future__ import annotations

from .network import TAPER_N2_DEFAULT, VesselNetwork, network_from_dict
from .waveform import synthetic_inflow

# id: (name, parent, orientation when upright)
TOPOLOGY = {
    1: ("Ascending aorta", None, "up"),
    2: ("Aortic arch I", 1, "horizontal"),
    3: ("Brachiocephalic", 1, "up"),
    4: ("Aortic arch II", 2, "horizontal"),
    5: ("L common carotid", 2, "up"),
    6: ("L vertebral", 7, "up"),
    7: ("L subclavian", 4, "horizontal"),
    8: ("Thoracic aorta", 4, "down"),
    9: ("R subclavian", 3, "horizontal"),
    10: ("L brachial", 7, "down"),
    11: ("R vertebral", 9, "up"),
    12: ("L external carotid", 5, "up"),
    13: ("L internal carotid I", 5, "up"),
    14: ("R external carotid", 16, "up"),
    15: ("R internal carotid I", 16, "up"),
    16: ("R common carotid", 3, "up"),
    17: ("R brachial", 9, "down"),
    18: ("Basilar", 11, "up"),
    19: ("L PCA I", 18, "horizontal"),
    20: ("R PCA I", 18, "horizontal"),
    21: ("L PCA II", 19, "horizontal"),
    22: ("L PCoA", 19, "horizontal"),
    23: ("R PCA II", 20, "horizontal"),
    24: ("R PCoA", 20, "horizontal"),
    25: ("L internal carotid II", 13, "up"),
    26: ("R internal carotid II", 15, "up"),
    27: ("L MCA", 25, "horizontal"),
    28: ("L ACA I", 25, "horizontal"),
    29: ("R MCA", 26, "horizontal"),
    30: ("R ACA I", 26, "horizontal"),
    31: ("L ACA II", 28, "horizontal"),
    32: ("ACoA", 28, "horizontal"),
    33: ("R ACA II", 30, "horizontal"),
    34: ("Celiac axis I", 8, "horizontal"),
    35: ("Abdominal aorta I", 8, "down"),
    36: ("Superior mesenteric", 35, "horizontal"),
    37: ("Abdominal aorta II", 35, "down"),
    38: ("L renal", 37, "horizontal"),
    39: ("Abdominal aorta III", 37, "down"),
    40: ("R renal", 39, "horizontal"),
    41: ("Abdominal aorta IV", 39, "down"),
    42: ("Inferior mesenteric", 41, "down"),
    43: ("Abdominal aorta V", 41, "down"),
    44: ("L external iliac", 43, "down"),
    45: ("R external iliac", 43, "down"),
    46: ("L internal iliac", 44, "down"),
    47: ("L femoral I", 44, "down"),
    48: ("R internal iliac", 45, "down"),
    49: ("R femoral I", 45, "down"),
    50: ("L femoral II", 47, "down"),
    51: ("L deep femoral", 47, "down"),
    52: ("R femoral II", 49, "down"),
    53: ("R deep femoral", 49, "down"),
    54: ("Splenic", 34, "horizontal"),
    55: ("Celiac axis II", 34, "horizontal"),
    56: ("Left gastric", 55, "horizontal"),
    57: ("Hepatic", 55, "horizontal"),
}

# (ids sharing a row): (DORV L, Rin, Rout), (HLHS L, Rin, Rout)
_DIMENSIONS = [
    ((1,), (4.07, 1.20, 1.10), (3.87, 1.96, 1.88)),
    ((2,), (1.95, 1.10, 1.10), (1.93, 1.60, 1.20)),
    ((3,), (1.23, 0.57, 0.49), (1.60, 0.57, 0.52)),
    ((4,), (1.94, 0.95, 0.88), (3.77, 1.55, 1.06)),
    ((5,), (20.23, 0.36, 0.36), (20.1, 0.36, 0.36)),
    ((6, 11), (14.4, 0.20, 0.19), (14.3, 0.20, 0.19)),
    ((7, 9), (3.67, 0.59, 0.37), (3.27, 0.46, 0.39)),
    ((8,), (15.17, 0.88, 0.70), (15.07, 1.44, 0.69)),
    ((10, 17), (20.23, 0.35, 0.30), (20.1, 0.34, 0.30)),
    ((12, 14), (17.22, 0.32, 0.32), (17.01, 0.31, 0.31)),
    ((13, 15), (17.12, 0.32, 0.32), (17.01, 0.31, 0.31)),
    ((16,), (17.22, 0.39, 0.39), (17.10, 0.39, 0.39)),
    ((18,), (2.76, 0.15, 0.15), (2.74, 0.15, 0.15)),
    ((19, 20), (0.48, 0.10, 0.10), (0.47, 0.10, 0.10)),
    ((21, 23), (8.18, 0.10, 0.10), (8.13, 0.10, 0.10)),
    ((22, 24), (1.43, 0.07, 0.07), (1.42, 0.07, 0.07)),
    ((25, 26), (0.48, 0.19, 0.19), (0.47, 0.19, 0.19)),
    ((27, 29), (11.32, 0.14, 0.14), (11.24, 0.14, 0.14)),
    ((28, 30), (1.14, 0.11, 0.11), (1.13, 0.11, 0.11)),
    ((31, 33), (9.8, 0.11, 0.11), (9.73, 0.11, 0.11)),
    ((32,), (0.29, 0.07, 0.07), (0.28, 0.07, 0.07)),
    ((34,), (1.95, 0.37, 0.37), (1.93, 0.37, 0.37)),
    ((35,), (5.16, 0.59, 0.57), (5.12, 0.59, 0.47)),
    ((36,), (5.74, 0.29, 0.29), (5.70, 0.29, 0.29)),
    ((37,), (0.97, 0.57, 0.55), (0.97, 0.57, 0.55)),
    ((38, 40), (3.11, 0.25, 0.25), (3.09, 0.25, 0.25)),
    ((39,), (0.97, 0.55, 0.53), (0.97, 0.55, 0.53)),
    ((41,), (10.31, 0.53, 0.51), (10.24, 0.53, 0.50)),
    ((42,), (4.86, 0.16, 0.16), (4.83, 0.15, 0.15)),
    ((43,), (0.97, 0.51, 0.48), (0.97, 0.50, 0.48)),
    ((44, 45), (14.01, 0.27, 0.26), (13.91, 0.27, 0.26)),
    ((46, 48), (4.86, 0.26, 0.26), (4.83, 0.26, 0.26)),
    ((47, 49), (13.09, 0.24, 0.21), (13.00, 0.21, 0.21)),
    ((50, 52), (43.09, 0.21, 0.21), (42.81, 0.21, 0.21)),
    ((51, 53), (12.26, 0.15, 0.12), (12.17, 0.14, 0.12)),
    ((54,), (5.99, 0.21, 0.19), (5.95, 0.21, 0.19)),
    ((55,), (1.90, 0.25, 0.25), (1.89, 0.25, 0.25)),
    ((56,), (6.75, 0.15, 0.14), (6.71, 0.15, 0.14)),
    ((57,), (6.28, 0.26, 0.21), (6.24, 0.26, 0.21)),
]

# Tuned per-vessel r_min and k3: {patient: {ids: value}}
_RMIN = {
    "dorv": {(10, 17): 0.03, (12, 14): 0.001, (21, 23): 0.001, (27, 29): 0.001,
             (31, 33): 0.001, (46, 48, 47, 49, 50, 52, 51, 53): 0.01},
    "hlhs": {(10, 17): 0.03, (12, 14): 0.001, (21, 23): 0.001, (27, 29): 0.001,
             (31, 33): 0.001, (46, 48, 47, 49, 50, 52, 51, 53): 0.10},
}
_K3 = {
    "dorv": {(1, 2, 4): 3.8e5, (5, 16): 3.8e5, (6, 11): 7.6e5, (7, 9): 3.8e5, (8,): 3.8e5,
             (10, 17): 7.6e5, (12, 14, 13, 15): 2.66e6, (21, 23): 1.9e6,
             (35, 37, 39, 41, 43): 3.8e5, tuple(range(44, 53)): 3.8e5},
    "hlhs": {(1, 2, 4): 5.7e5, (5, 16): 4.56e5, (6, 11): 1.9e6, (7, 9): 5.7e5, (8,): 5.7e5,
             (10, 17): 3.8e5, (12, 14, 13, 15): 2.66e6, (21, 23): 2.66e6,
             (35, 37, 39, 41, 43): 3.04e5, tuple(range(44, 53)): 3.04e5},
}

PATIENTS = {
    # weight kg, cardiac cycle s, cardiac output L/min, cuff systolic/diastolic mmHg
    "dorv": {"weight": 59.6, "period": 0.658, "output_lpm": 4.06, "cuff": (110.0, 67.0),
             "p0_mmHg": 65.0},
    "hlhs": {"weight": 62.0, "period": 0.615, "output_lpm": 5.08, "cuff": (116.0, 65.0),
             "p0_mmHg": 65.0},
}
# p0 is the reference pressure of the wall law and the outlet baseline. The
# model depends only on p - p0, so p0 shifts every pressure without changing
# its shape; the value places the simulated brachial mean at the cuff mean
# pressure, diastolic + (systolic - diastolic) / 3.

AORTIC_SEGMENTS = (1, 2, 4, 8)
BRACHIAL = (10, 17)

# Terminal vessels grouped by territory; together they cover every outlet.
REGIONS = {
    "cerebral": (21, 22, 23, 24, 27, 29, 31, 32, 33),
    "head_neck": (6, 12, 14),
    "upper_limbs": (10, 17),
    "liver_gut": (36, 42, 54, 56, 57),
    "renal": (38, 40),
    "lower_body": (46, 48, 50, 51, 52, 53),
}


def _expand(table):
    out = {}
    for ids, val in table.items():
        for i in ids:
            out[i] = val
    return out


def network_dict(patient: str = "dorv", tuned: bool = True) -> dict:
    """JSON-ready network description for ``"dorv"`` or ``"hlhs"``."""
    col = {"dorv": 1, "hlhs": 2}[patient]
    dims = {}
    for row in _DIMENSIONS:
        for i in row[0]:
            dims[i] = row[col]
    parents = {p for (_, p, _) in TOPOLOGY.values() if p is not None}
    rmin = _expand(_RMIN[patient]) if tuned else {}
    k3 = _expand(_K3[patient]) if tuned else {}
    vessels = []
    for vid in sorted(TOPOLOGY):
        name, parent, orient = TOPOLOGY[vid]
        length, r_in, r_out = dims[vid]
        terminal = vid not in parents
        overrides = {}
        if vid in k3:
            overrides["k3"] = k3[vid]
        if terminal and vid in rmin:
            overrides["r_min"] = rmin[vid]
        vessels.append({
            "id": vid, "name": name, "length_cm": length, "r_in_cm": r_in,
            "r_out_cm": r_out, "parent": parent, "orientation": orient,
            "terminal": terminal, "overrides": overrides,
        })
    return {
        "fluid": {"rho": 1.057, "mu": 0.032, "g": 981.0,
                  "p0_mmHg": PATIENTS[patient]["p0_mmHg"]},
        "stiffness": {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5, "k2_convention": "decaying"},
        "taper": {"n2": TAPER_N2_DEFAULT},
        "vessels": vessels,
    }


def patient_network(patient: str = "dorv", tuned: bool = True) -> VesselNetwork:
    return network_from_dict(network_dict(patient, tuned))


def tuned_overrides(patient: str = "dorv") -> list:
    """Per-vessel overrides in run-config form."""
    out = [{"vessels": list(ids), "k3": val} for ids, val in _K3[patient].items()]
    out += [{"vessels": list(ids), "r_min": val} for ids, val in _RMIN[patient].items()]
    return out


def patient_inflow(patient: str = "dorv", n: int = 512):
    info = PATIENTS[patient]
    return synthetic_inflow(info["output_lpm"] * 1000.0 / 60.0, info["period"], n=n)
