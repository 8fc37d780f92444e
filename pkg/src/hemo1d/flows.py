"""Rescaling of measured mean flows so that every plane junction conserves mass."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class FlowScalingError(ValueError):
    pass


@dataclass(frozen=True)
class Plane:
    """One measurement plane.

    ``kind`` is ``"trunk"`` for the continuation of the upstream plane (at
    most one per parent) or ``"branch"`` for a side branch. The root plane
    has no parent.
    """

    name: str
    flow: float
    parent: str | None = None
    kind: str = "trunk"


@dataclass
class MeasuredFlowSet:
    """Mean flows (L/min) on named planes plus their parent-daughter relations.

    ``targets`` pins trunk planes to given values during scaling; ``factors``
    is filled by :func:`scale_measured_flows`.
    """

    planes: list
    targets: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [p.name for p in self.planes]
        if len(set(names)) != len(names):
            raise FlowScalingError("duplicate plane names")
        known = set(names)
        roots = [p for p in self.planes if p.parent is None]
        if len(roots) != 1:
            raise FlowScalingError("exactly one root plane is required")
        for p in self.planes:
            if p.flow < 0:
                raise FlowScalingError(f"plane {p.name!r}: negative flow")
            if p.kind not in ("trunk", "branch"):
                raise FlowScalingError(f"plane {p.name!r}: kind must be 'trunk' or 'branch'")
            if p.parent is not None and p.parent not in known:
                raise FlowScalingError(f"plane {p.name!r}: unknown parent {p.parent!r}")
        for name in self.targets:
            if name not in known:
                raise FlowScalingError(f"target for unknown plane {name!r}")
        for parent in known:
            trunks = [p for p in self.planes if p.parent == parent and p.kind == "trunk"]
            if len(trunks) > 1:
                raise FlowScalingError(f"plane {parent!r} has more than one trunk continuation")
        self.order()  # raises on cycles

    def __getitem__(self, name) -> float:
        return self.by_name[name].flow

    @property
    def by_name(self) -> dict:
        return {p.name: p for p in self.planes}

    def children(self, name):
        return [p for p in self.planes if p.parent == name]

    def order(self) -> list:
        """Plane names in topological (root-first) order."""
        root = next(p.name for p in self.planes if p.parent is None)
        out, stack, seen = [], [root], set()
        while stack:
            cur = stack.pop()
            if cur in seen:
                raise FlowScalingError("plane relations contain a cycle")
            seen.add(cur)
            out.append(cur)
            stack.extend(c.name for c in reversed(self.children(cur)))
        if len(out) != len(self.planes):
            raise FlowScalingError("plane relations contain a cycle or a detached plane")
        return out

    def junction_residuals(self) -> dict:
        """Relative imbalance ``(parent - sum daughters) / parent`` per junction."""
        out = {}
        for name in self.order():
            kids = self.children(name)
            if kids:
                par = self[name]
                out[name] = (par - sum(k.flow for k in kids)) / par if par else 0.0
        return out

    def to_dict(self) -> dict:
        return {"planes": [{"name": p.name, "flow_lpm": p.flow, "parent": p.parent,
                            "kind": p.kind} for p in self.planes],
                "targets": dict(self.targets), "factors": dict(self.factors)}


def scale_measured_flows(flows: MeasuredFlowSet) -> MeasuredFlowSet:
    """Rescale branch flows so each junction conserves mass.

    Planes are processed root first. A trunk plane takes its target if one is
    given, otherwise its data value clipped to the scaled upstream value; a
    trunk plane without sibling branches inherits the upstream value. Side
    branches of a junction share one factor so that their sum equals the
    upstream value minus the trunk value. The applied factor
    ``scaled / data`` of every plane is stored in ``factors``.

    Raises
    ------
    FlowScalingError
        If a junction needs a negative branch total, or a positive total from
        branches measured at zero.
    """
    data = {p.name: p.flow for p in flows.planes}
    scaled = {}
    order = flows.order()
    scaled[order[0]] = flows.targets.get(order[0], data[order[0]])
    for name in order:
        kids = flows.children(name)
        if not kids:
            continue
        up = scaled[name]
        trunk = [k for k in kids if k.kind == "trunk"]
        branches = [k for k in kids if k.kind == "branch"]
        if trunk:
            t = trunk[0]
            if not branches:
                val = up
                if t.name in flows.targets and abs(flows.targets[t.name] - up) > 1e-12 * max(up, 1.0):
                    raise FlowScalingError(f"target for {t.name!r} breaks conservation")
            elif t.name in flows.targets:
                val = flows.targets[t.name]
            else:
                val = min(data[t.name], up)
            if val > up * (1 + 1e-12):
                raise FlowScalingError(f"trunk {t.name!r} target {val} exceeds upstream {up}")
            scaled[t.name] = val
            need = up - val
        else:
            need = up
        if branches:
            if need < 0:
                raise FlowScalingError(f"junction at {name!r}: branch total would be negative")
            total = sum(data[b.name] for b in branches)
            if total == 0:
                if need > 0:
                    raise FlowScalingError(f"junction at {name!r}: branches measured at zero")
                fac = 1.0
            else:
                fac = need / total
            running = 0.0
            for b in branches[:-1]:
                scaled[b.name] = data[b.name] * fac
                running += scaled[b.name]
            # last branch absorbs rounding so the junction balances exactly
            scaled[branches[-1].name] = need - running
    factors = {n: (scaled[n] / data[n] if data[n] else 1.0) for n in order}
    planes = [Plane(p.name, scaled[p.name], p.parent, p.kind) for p in flows.planes]
    return MeasuredFlowSet(planes, dict(flows.targets), factors)


def flow_set_from_dict(d: dict) -> MeasuredFlowSet:
    try:
        planes = [Plane(str(p["name"]), float(p["flow_lpm"]), p.get("parent"),
                        p.get("kind", "trunk")) for p in d["planes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowScalingError(f"bad measured-flow entry: {exc}") from None
    targets = {str(k): float(v) for k, v in d.get("targets", {}).items()}
    return MeasuredFlowSet(planes, targets)


def load_flow_set(path) -> MeasuredFlowSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"measured-flow file not found: {path}")
    with open(path) as fh:
        return flow_set_from_dict(json.load(fh))
