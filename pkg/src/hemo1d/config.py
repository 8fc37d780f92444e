"""Run configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .network import POSTURES, VesselNetwork, load_network
from .solver import GridConfig

# Nominal structured-tree and wall parameters
TREE_DEFAULTS = {"k1": 2.0e6, "k2": -35.0, "k3": 3.8e5, "r_min": 0.01,
                 "alpha": 0.90, "beta": 0.60, "lrr": 50.0}
OVERRIDE_KEYS = ("k3", "r_min")
GRID_KEYS = {f.name for f in dataclasses.fields(GridConfig)}


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


@dataclass(frozen=True)
class Override:
    vessels: tuple
    k3: float | None = None
    r_min: float | None = None


@dataclass(frozen=True)
class ExerciseSpec:
    enabled: bool = False
    flow_factor: float = 2.0
    period_factor: float = 0.6


@dataclass(frozen=True)
class RunConfig:
    network: Path
    inflow: Path | None
    output: Path
    posture: str = "supine"
    exercise: ExerciseSpec = ExerciseSpec()
    grid: GridConfig = GridConfig()
    parameters: dict = field(default_factory=lambda: dict(TREE_DEFAULTS))
    overrides: tuple = ()
    measured_flows: Path | None = None
    p0_mmHg: float | None = None
    workers: int = 1
    wia_vessels: tuple = (1, 2, 4, 8)
    dump_spectra: bool = False

    def to_dict(self) -> dict:
        d = {
            "network": str(self.network),
            "inflow": None if self.inflow is None else str(self.inflow),
            "output": str(self.output),
            "posture": self.posture,
            "exercise": dataclasses.asdict(self.exercise),
            "grid": dataclasses.asdict(self.grid),
            "parameters": dict(self.parameters),
            "overrides": [{"vessels": list(o.vessels), **({"k3": o.k3} if o.k3 is not None else {}),
                           **({"r_min": o.r_min} if o.r_min is not None else {})}
                          for o in self.overrides],
            "measured_flows": None if self.measured_flows is None else str(self.measured_flows),
            "p0_mmHg": self.p0_mmHg,
            "workers": self.workers,
            "wia_vessels": list(self.wia_vessels),
            "dump_spectra": self.dump_spectra,
        }
        return d

    def digest(self) -> str:
        """Hash of the scientific content (paths replaced by file contents)."""
        d = self.to_dict()
        d.pop("output")
        d.pop("workers")
        for key in ("network", "inflow", "measured_flows"):
            if d[key] is not None:
                d[key] = hashlib.sha256(Path(d[key]).read_bytes()).hexdigest()
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _num(d, key, path, positive=False, default=None):
    if d.get(key) is None:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}: must be positive")
    return float(v)


def config_from_dict(d: dict, base: Path | None = None, check_files: bool = True) -> RunConfig:
    """Validate a config mapping; relative paths resolve against ``base``."""
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object")
    base = Path(base) if base is not None else Path.cwd()
    known = {"network", "inflow", "output", "posture", "exercise", "grid", "parameters",
             "overrides", "measured_flows", "p0_mmHg", "workers", "wia_vessels", "dump_spectra"}
    for k in d:
        if k not in known:
            raise ConfigError(f"config.{k}: unknown field")

    def path_of(key, required):
        v = d.get(key)
        if v is None:
            if required:
                raise ConfigError(f"config.{key}: required")
            return None
        if not isinstance(v, str):
            raise ConfigError(f"config.{key}: expected a path string")
        p = Path(v)
        p = p if p.is_absolute() else base / p
        if check_files and not p.exists():
            raise ConfigError(f"config.{key}: file not found: {p}")
        return p

    network = path_of("network", True)
    inflow = path_of("inflow", False)
    flows = path_of("measured_flows", False)
    out = d.get("output", "out")
    if not isinstance(out, str):
        raise ConfigError("config.output: expected a path string")
    output = Path(out) if Path(out).is_absolute() else base / out

    posture = d.get("posture", "supine")
    if posture not in POSTURES:
        raise ConfigError(f"config.posture: must be one of {POSTURES}")

    ex = d.get("exercise", {})
    if isinstance(ex, bool):
        ex = {"enabled": ex}
    if not isinstance(ex, dict):
        raise ConfigError("config.exercise: expected an object")
    for k in ex:
        if k not in ("enabled", "flow_factor", "period_factor"):
            raise ConfigError(f"config.exercise.{k}: unknown field")
    exercise = ExerciseSpec(bool(ex.get("enabled", False)),
                            _num(ex, "flow_factor", "config.exercise", True, 2.0),
                            _num(ex, "period_factor", "config.exercise", True, 0.6))

    g = d.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError("config.grid: expected an object")
    for k in g:
        if k not in GRID_KEYS:
            raise ConfigError(f"config.grid.{k}: unknown field")
    try:
        grid = GridConfig(**g)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.grid: {exc}") from None

    params = dict(TREE_DEFAULTS)
    pd = d.get("parameters", {})
    if not isinstance(pd, dict):
        raise ConfigError("config.parameters: expected an object")
    for k in pd:
        if k not in TREE_DEFAULTS:
            raise ConfigError(f"config.parameters.{k}: unknown field")
        params[k] = _num(pd, k, "config.parameters", positive=(k != "k2"))
    if not 0 < params["beta"] <= params["alpha"] < 1:
        raise ConfigError("config.parameters: need 0 < beta <= alpha < 1")

    ovs = []
    raw = d.get("overrides", [])
    if not isinstance(raw, list):
        raise ConfigError("config.overrides: expected a list")
    for i, o in enumerate(raw):
        path = f"config.overrides[{i}]"
        if not isinstance(o, dict):
            raise ConfigError(f"{path}: expected an object")
        for k in o:
            if k not in ("vessels",) + OVERRIDE_KEYS:
                raise ConfigError(f"{path}.{k}: unknown field")
        ids = o.get("vessels")
        if not isinstance(ids, list) or not ids or not all(isinstance(v, int) for v in ids):
            raise ConfigError(f"{path}.vessels: expected a non-empty list of vessel ids")
        ovs.append(Override(tuple(ids), _num(o, "k3", path, True), _num(o, "r_min", path, True)))

    workers = d.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("config.workers: expected a positive integer")
    wia = d.get("wia_vessels", [1, 2, 4, 8])
    if not isinstance(wia, list) or not all(isinstance(v, int) for v in wia):
        raise ConfigError("config.wia_vessels: expected a list of vessel ids")

    cfg = RunConfig(network=network, inflow=inflow, output=output, posture=posture,
                    exercise=exercise, grid=grid, parameters=params, overrides=tuple(ovs),
                    measured_flows=flows, p0_mmHg=_num(d, "p0_mmHg", "config"),
                    workers=workers, wia_vessels=tuple(wia),
                    dump_spectra=bool(d.get("dump_spectra", False)))
    if check_files:
        net = load_network(network)
        validate_ids(cfg, net)
    return cfg


def validate_ids(cfg: RunConfig, net: VesselNetwork):
    for i, o in enumerate(cfg.overrides):
        for vid in o.vessels:
            if vid not in net:
                raise ConfigError(f"config.overrides[{i}].vessels: unknown vessel id {vid}")
    for vid in cfg.wia_vessels:
        if vid not in net:
            raise ConfigError(f"config.wia_vessels: unknown vessel id {vid}")


def parse_config(path) -> RunConfig:
    """Load and validate a JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return config_from_dict(d, base=path.parent)


def apply_parameters(net: VesselNetwork, cfg: RunConfig) -> VesselNetwork:
    """Network with the config's stiffness, p0 and per-vessel overrides applied."""
    p = cfg.parameters
    changes = {"k1": p["k1"], "k2": p["k2"], "k3": p["k3"]}
    if cfg.p0_mmHg is not None:
        from .wall import MMHG
        changes["p0"] = cfg.p0_mmHg * MMHG
    net = net.replace(**changes)
    if not cfg.overrides:
        return net
    vessels = {v.id: v for v in net.vessels}
    for o in cfg.overrides:
        for vid in o.vessels:
            upd = {}
            if o.k3 is not None:
                upd["k3"] = o.k3
            if o.r_min is not None:
                upd["r_min"] = o.r_min
            vessels[vid] = dataclasses.replace(vessels[vid], **upd)
    return net.replace_vessels(vessels[v.id] for v in net.vessels)
