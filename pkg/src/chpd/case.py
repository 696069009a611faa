"""Domain types for a coupled electric/district-heating system.

Units follow the case file: powers in MW / MVAr, voltages and currents as
squared per-unit magnitudes, branch impedances in per unit on ``base_mva``,
pressures in Pa, flows in kg/s, temperatures in degC, lengths in m.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

INF = math.inf


class CaseParseError(ValueError):
    """The case file is not well-formed."""


class CaseValidationError(ValueError):
    """A case invariant is violated; ``report`` lists every finding."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(str(i) for i in report.errors) or "invalid case")


class TopologyError(CaseValidationError):
    """Non-radial EPS or disconnected DHS."""


# -- value types -------------------------------------------------------------


@dataclass(frozen=True)
class PhysicalConstants:
    water_density: float = 1000.0
    specific_heat: float = 4182.0
    gravity: float = 9.81
    head_to_pressure: float | None = None

    def __post_init__(self):
        if self.head_to_pressure is None:
            object.__setattr__(self, "head_to_pressure", self.water_density * self.gravity)


@dataclass(frozen=True)
class TimeGrid:
    step_length: float = 3600.0
    num_periods: int = 24

    @property
    def hours(self) -> float:
        return self.step_length / 3600.0

    @property
    def periods(self) -> range:
        return range(self.num_periods)


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float = 0.81
    v_max: float = 1.21
    p_demand: tuple[float, ...] = ()
    q_demand: tuple[float, ...] = ()


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    l_max: float = INF

    @property
    def key(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class Substation:
    """Upstream grid connection at the root bus (voltage fixed to 1 p.u.)."""

    bus: int = 1
    cost: float = 0.0
    p_min: float = -INF
    p_max: float = INF
    q_min: float = -INF
    q_max: float = INF


@dataclass(frozen=True, kw_only=True)
class Device:
    id: str
    bus: int
    p_min: float = 0.0
    p_max: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0
    ramp_p: float = INF
    ramp_q: float = INF
    cost: float = 0.0
    p_init: float | None = None
    q_init: float | None = None

    kind = "device"

    @property
    def initial_p(self) -> float:
        return 0.5 * (self.p_min + self.p_max) if self.p_init is None else self.p_init

    @property
    def initial_q(self) -> float:
        return 0.5 * (self.q_min + self.q_max) if self.q_init is None else self.q_init


@dataclass(frozen=True, kw_only=True)
class Generator(Device):
    kind = "generator"


@dataclass(frozen=True, kw_only=True)
class Chp(Device):
    heat_ratio: float
    dhs_node: int
    kind = "chp"


@dataclass(frozen=True, kw_only=True)
class HeatPump(Device):
    cop: float
    dhs_node: int
    kind = "heat_pump"


@dataclass(frozen=True, kw_only=True)
class Pv(Device):
    forecast: tuple[float, ...] = ()
    kind = "pv"


@dataclass(frozen=True, kw_only=True)
class Wt(Device):
    forecast: tuple[float, ...] = ()
    q_ratio: float = 0.0
    kind = "wt"


DEVICE_KINDS: dict[str, type[Device]] = {
    c.kind: c for c in (Generator, Chp, HeatPump, Pv, Wt)
}


@dataclass(frozen=True)
class DhsNode:
    id: int
    heat_demand: tuple[float, ...] = ()
    ts_bounds: tuple[float, float] = (70.0, 100.0)
    tr_bounds: tuple[float, float] = (30.0, 70.0)
    ps_bounds: tuple[float, float] = (0.0, 1e7)
    pr_bounds: tuple[float, float] = (0.0, 1e7)
    m_bounds: tuple[float, float] = (0.0, 1e3)
    hx_area: float = 0.0
    minor_loss: float = 0.0
    max_drop: float = math.inf   # K, design limit on T^S - T^R,out across the exchanger

    @property
    def is_exchanger(self) -> bool:
        return self.hx_area > 0.0


@dataclass(frozen=True)
class PumpSpec:
    gamma1: float
    gamma2: float
    gamma3: float
    efficiency: float
    p_max: float
    bus: int


@dataclass(frozen=True)
class PipeSpec:
    from_node: int
    to_node: int
    length: float
    diameter: float
    roughness: float = 5e-4
    reynolds: float = 1e5
    conductivity: float = 0.3
    m_bounds: tuple[float, float] = (0.0, 500.0)
    valve: bool = False
    pump: PumpSpec | None = None
    ts_init: float = 80.0
    tr_init: float = 40.0

    @property
    def key(self) -> str:
        return f"{self.from_node}-{self.to_node}"

    @property
    def area(self) -> float:
        return math.pi * self.diameter**2 / 4.0

    def water_mass(self, density: float) -> float:
        return math.pi * self.length * self.diameter**2 * density / 4.0


@dataclass(frozen=True)
class Case:
    name: str
    constants: PhysicalConstants
    grid: TimeGrid
    base_mva: float
    substation: Substation
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    devices: tuple[Device, ...]
    nodes: tuple[DhsNode, ...]
    pipes: tuple[PipeSpec, ...]
    ground_temp: tuple[float, ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    # -- lookups -----------------------------------------------------------
    @property
    def T(self) -> int:
        return self.grid.num_periods

    def bus(self, i: int) -> Bus:
        return self._bus_map()[i]

    def _bus_map(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    def node(self, k: int) -> DhsNode:
        return {n.id: n for n in self.nodes}[k]

    def pipe(self, key: str) -> PipeSpec:
        return {p.key: p for p in self.pipes}[key]

    def devices_of(self, kind: type[Device]) -> list[Device]:
        return [d for d in self.devices if type(d) is kind]

    @property
    def pumps(self) -> list[PipeSpec]:
        return [p for p in self.pipes if p.pump is not None]

    @property
    def exchangers(self) -> list[DhsNode]:
        return [n for n in self.nodes if n.is_exchanger]

    @property
    def source_nodes(self) -> list[int]:
        ids = {d.dhs_node for d in self.devices if isinstance(d, (Chp, HeatPump))}
        return [n.id for n in self.nodes if n.id in ids]

    @property
    def anchor_node(self) -> int | None:
        """Source node whose return pressure is pinned to its lower bound."""
        src = self.source_nodes
        if src:
            return src[0]
        return self.nodes[0].id if self.nodes else None

    def pipes_into(self, k: int) -> list[PipeSpec]:
        return [p for p in self.pipes if p.to_node == k]

    def pipes_out_of(self, k: int) -> list[PipeSpec]:
        return [p for p in self.pipes if p.from_node == k]

    def peak_electric_load(self) -> float:
        return max(sum(b.p_demand[t] for b in self.buses) for t in self.grid.periods)

    def peak_heat_load(self) -> float:
        return max(sum(n.heat_demand[t] for n in self.nodes) for t in self.grid.periods)


# -- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    path: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    def add(self, path: str, message: str, severity: str = "error") -> None:
        self.issues.append(Issue(path, message, severity))

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def topology(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "topology"]

    @property
    def ok(self) -> bool:
        return not self.issues

    def __len__(self) -> int:
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)


def _interval(rep: ValidationReport, path: str, lo: float, hi: float) -> None:
    if not (lo <= hi):
        rep.add(path, f"empty interval [{lo}, {hi}]")


def _series(rep: ValidationReport, path: str, s: tuple, T: int) -> None:
    if len(s) != T:
        rep.add(path, f"series has length {len(s)}, expected {T}")


def _radial_check(rep: ValidationReport, case: Case) -> None:
    ids = [b.id for b in case.buses]
    children: dict[int, list[int]] = defaultdict(list)
    parents: dict[int, int] = {}
    for i, br in enumerate(case.branches):
        if br.to_bus in parents or br.to_bus == case.substation.bus:
            rep.add(f"eps.branches[{i}]", f"bus {br.to_bus} has more than one feeding branch", "topology")
        parents[br.to_bus] = br.from_bus
        children[br.from_bus].append(br.to_bus)
    if len(case.branches) != len(ids) - 1:
        rep.add("eps.branches", f"{len(case.branches)} branches for {len(ids)} buses is not a tree", "topology")
    seen = {case.substation.bus}
    queue = deque([case.substation.bus])
    while queue:
        j = queue.popleft()
        for k in children[j]:
            if k in seen:
                rep.add("eps.branches", f"cycle through bus {k}", "topology")
                continue
            seen.add(k)
            queue.append(k)
    missing = sorted(set(ids) - seen)
    if missing:
        rep.add("eps.branches", f"buses {missing} unreachable from the root", "topology")


def _dhs_connected(rep: ValidationReport, case: Case) -> None:
    if not case.nodes:
        return
    adj: dict[int, set[int]] = defaultdict(set)
    for p in case.pipes:
        adj[p.from_node].add(p.to_node)
        adj[p.to_node].add(p.from_node)
    start = case.nodes[0].id
    seen = {start}
    stack = [start]
    while stack:
        k = stack.pop()
        for l in adj[k] - seen:
            seen.add(l)
            stack.append(l)
    missing = sorted({n.id for n in case.nodes} - seen)
    if missing:
        rep.add("dhs.pipes", f"nodes {missing} are disconnected", "topology")


def validate_case(case: Case) -> ValidationReport:
    rep = ValidationReport()
    T = case.T
    c = case.constants
    for name in ("water_density", "specific_heat", "gravity", "head_to_pressure"):
        if not getattr(c, name) > 0:
            rep.add(f"constants.{name}", "must be positive")
    if not case.grid.step_length > 0:
        rep.add("grid.step_length", "must be positive")
    if case.grid.num_periods < 1:
        rep.add("grid.num_periods", "must be at least 1")
    if not case.base_mva > 0:
        rep.add("eps.base_mva", "must be positive")

    bus_ids = [b.id for b in case.buses]
    if len(set(bus_ids)) != len(bus_ids):
        rep.add("eps.buses", "duplicate bus ids")
    bus_set = set(bus_ids)
    if case.substation.bus not in bus_set:
        rep.add("eps.substation.bus", f"unknown bus {case.substation.bus}")
    _interval(rep, "eps.substation.p", case.substation.p_min, case.substation.p_max)
    _interval(rep, "eps.substation.q", case.substation.q_min, case.substation.q_max)
    for i, b in enumerate(case.buses):
        p = f"eps.buses[{i}]"
        if not (0 < b.v_min <= b.v_max):
            rep.add(f"{p}.v", f"need 0 < v_min <= v_max, got [{b.v_min}, {b.v_max}]")
        _series(rep, f"{p}.p_demand", b.p_demand, T)
        _series(rep, f"{p}.q_demand", b.q_demand, T)
    for i, br in enumerate(case.branches):
        p = f"eps.branches[{i}]"
        for end in (br.from_bus, br.to_bus):
            if end not in bus_set:
                rep.add(p, f"unknown bus {end}")
        if br.r < 0:
            rep.add(f"{p}.r", "must be nonnegative")
        if br.x < 0:
            rep.add(f"{p}.x", "must be nonnegative")
        if not br.l_max > 0:
            rep.add(f"{p}.l_max", "must be positive")

    node_set = {n.id for n in case.nodes}
    if len(node_set) != len(case.nodes):
        rep.add("dhs.nodes", "duplicate node ids")
    dev_ids = [d.id for d in case.devices]
    if len(set(dev_ids)) != len(dev_ids):
        rep.add("eps.devices", "duplicate device ids")
    for i, d in enumerate(case.devices):
        p = f"eps.devices[{i}]({d.id})"
        if d.bus not in bus_set:
            rep.add(f"{p}.bus", f"unknown bus {d.bus}")
        _interval(rep, f"{p}.p", d.p_min, d.p_max)
        _interval(rep, f"{p}.q", d.q_min, d.q_max)
        if d.ramp_p < 0 or d.ramp_q < 0:
            rep.add(f"{p}.ramp", "ramp limits must be nonnegative")
        if d.cost < 0:
            rep.add(f"{p}.cost", "must be nonnegative")
        if isinstance(d, Chp):
            if not d.heat_ratio > 0:
                rep.add(f"{p}.heat_ratio", "must be positive")
            if d.dhs_node not in node_set:
                rep.add(f"{p}.dhs_node", f"unknown node {d.dhs_node}")
        if isinstance(d, HeatPump):
            if not d.cop > 0:
                rep.add(f"{p}.cop", "must be positive")
            if d.dhs_node not in node_set:
                rep.add(f"{p}.dhs_node", f"unknown node {d.dhs_node}")
        if isinstance(d, (Pv, Wt)):
            _series(rep, f"{p}.forecast", d.forecast, T)

    for i, n in enumerate(case.nodes):
        p = f"dhs.nodes[{i}]({n.id})"
        _series(rep, f"{p}.heat_demand", n.heat_demand, T)
        for nm in ("ts_bounds", "tr_bounds", "ps_bounds", "pr_bounds", "m_bounds"):
            lo, hi = getattr(n, nm)
            _interval(rep, f"{p}.{nm}", lo, hi)
        if n.minor_loss > 0 and not n.hx_area > 0:
            rep.add(f"{p}.hx_area", "must be positive where minor_loss > 0")
        if n.minor_loss < 0 or n.hx_area < 0:
            rep.add(p, "hx_area and minor_loss must be nonnegative")
        if not n.max_drop > 0:
            rep.add(f"{p}.max_drop", "must be positive")
        if any(h > 0 for h in n.heat_demand) and not n.is_exchanger:
            rep.add(f"{p}.heat_demand", "heat demand at a node without a heat exchanger")

    for i, pp in enumerate(case.pipes):
        p = f"dhs.pipes[{i}]({pp.key})"
        for end in (pp.from_node, pp.to_node):
            if end not in node_set:
                rep.add(p, f"unknown node {end}")
        if not pp.length > 0:
            rep.add(f"{p}.length", "must be positive")
        if not pp.diameter > 0:
            rep.add(f"{p}.diameter", "must be positive")
        if not pp.reynolds > 0:
            rep.add(f"{p}.reynolds", "must be positive")
        if pp.roughness < 0 or pp.conductivity < 0:
            rep.add(p, "roughness and conductivity must be nonnegative")
        lo, hi = pp.m_bounds
        _interval(rep, f"{p}.m_bounds", lo, hi)
        if lo < 0:
            rep.add(f"{p}.m_bounds", "flow direction is fixed, lower bound must be >= 0")
        if pp.pump is not None:
            pu = pp.pump
            if pu.bus not in bus_set:
                rep.add(f"{p}.pump.bus", f"unknown coupling bus {pu.bus}")
            if not (pu.gamma1 > 0 and pu.gamma2 > 0 and pu.gamma3 > 0):
                rep.add(f"{p}.pump", "curve coefficients must be positive")
            if not 0 < pu.efficiency <= 1:
                rep.add(f"{p}.pump.efficiency", "must lie in (0, 1]")
            if pu.p_max < 0:
                rep.add(f"{p}.pump.p_max", "must be nonnegative")
            if pp.valve:
                rep.add(p, "a pipe cannot carry both a pump and a valve")
    _series(rep, "series.ground_temp", case.ground_temp, T)

    if not rep.errors:
        _radial_check(rep, case)
        _dhs_connected(rep, case)
    return rep


def check_case(case: Case) -> Case:
    rep = validate_case(case)
    if rep.topology and not rep.errors:
        raise TopologyError(rep)
    if not rep.ok:
        raise CaseValidationError(rep)
    return case


# -- on-disk format --------------------------------------------------------------
#
# JSON document with sections constants / grid / eps / dhs / costs / series.
# Every time series lives under "series"; every cost coefficient under "costs".
# Infinite bounds are written as null.  Pressures may be given in Pa (default)
# or in meters of head by setting dhs.pressure_unit = "m".


def _num(x: float) -> float | None:
    return None if math.isinf(x) else x


def _inf(x, sign: float = 1.0) -> float:
    return sign * INF if x is None else float(x)


def _pair(v, default: tuple[float, float]) -> tuple[float, float]:
    if v is None:
        return default
    return (_inf(v[0], -1.0), _inf(v[1], 1.0))


def case_to_dict(case: Case) -> dict:
    costs: dict[str, float] = {"substation": case.substation.cost}
    series: dict[str, Any] = {
        "ground_temp": list(case.ground_temp),
        "p_demand": {str(b.id): list(b.p_demand) for b in case.buses},
        "q_demand": {str(b.id): list(b.q_demand) for b in case.buses},
        "heat_demand": {str(n.id): list(n.heat_demand) for n in case.nodes},
        "forecast": {},
    }
    devices = []
    for d in case.devices:
        costs[d.id] = d.cost
        entry: dict[str, Any] = {"id": d.id, "kind": d.kind, "bus": d.bus,
                                 "p": [_num(d.p_min), _num(d.p_max)],
                                 "q": [_num(d.q_min), _num(d.q_max)],
                                 "ramp": [_num(d.ramp_p), _num(d.ramp_q)]}
        if d.p_init is not None:
            entry["p_init"] = d.p_init
        if d.q_init is not None:
            entry["q_init"] = d.q_init
        if isinstance(d, Chp):
            entry.update(heat_ratio=d.heat_ratio, dhs_node=d.dhs_node)
        elif isinstance(d, HeatPump):
            entry.update(cop=d.cop, dhs_node=d.dhs_node)
        elif isinstance(d, Wt):
            entry["q_ratio"] = d.q_ratio
        if isinstance(d, (Pv, Wt)):
            series["forecast"][d.id] = list(d.forecast)
        devices.append(entry)
    s = case.substation
    nodes = [{"id": n.id, "ts": list(n.ts_bounds), "tr": list(n.tr_bounds),
              "ps": list(n.ps_bounds), "pr": list(n.pr_bounds), "m": list(n.m_bounds),
              "hx_area": n.hx_area, "minor_loss": n.minor_loss, "max_drop": _num(n.max_drop)}
             for n in case.nodes]
    pipes = []
    for p in case.pipes:
        e: dict[str, Any] = {"from": p.from_node, "to": p.to_node, "length": p.length,
                             "diameter": p.diameter, "roughness": p.roughness,
                             "reynolds": p.reynolds, "conductivity": p.conductivity,
                             "m": list(p.m_bounds), "valve": p.valve,
                             "t_init": [p.ts_init, p.tr_init]}
        if p.pump is not None:
            u = p.pump
            e["pump"] = {"gamma": [u.gamma1, u.gamma2, u.gamma3], "efficiency": u.efficiency,
                         "p_max": u.p_max, "bus": u.bus}
        pipes.append(e)
    c = case.constants
    return {
        "name": case.name,
        "constants": {"water_density": c.water_density, "specific_heat": c.specific_heat,
                      "gravity": c.gravity, "head_to_pressure": c.head_to_pressure},
        "grid": {"step_length": case.grid.step_length, "num_periods": case.grid.num_periods},
        "eps": {
            "base_mva": case.base_mva,
            "substation": {"bus": s.bus, "p": [_num(s.p_min), _num(s.p_max)],
                           "q": [_num(s.q_min), _num(s.q_max)]},
            "buses": [{"id": b.id, "v": [b.v_min, b.v_max]} for b in case.buses],
            "branches": [{"from": b.from_bus, "to": b.to_bus, "r": b.r, "x": b.x,
                          "l_max": _num(b.l_max)} for b in case.branches],
            "devices": devices,
        },
        "dhs": {"pressure_unit": "Pa", "nodes": nodes, "pipes": pipes},
        "costs": costs,
        "series": series,
        "meta": case.meta,
    }


def _tuple(v) -> tuple[float, ...]:
    return tuple(float(x) for x in v)


def case_from_dict(doc: dict) -> Case:
    try:
        cd = doc.get("constants", {})
        constants = PhysicalConstants(**{k: float(v) for k, v in cd.items()})
        g = doc["grid"]
        grid = TimeGrid(float(g["step_length"]), int(g["num_periods"]))
        eps, dhs = doc["eps"], doc["dhs"]
        costs = doc.get("costs", {})
        series = doc["series"]
        fc = series.get("forecast", {})
        s = eps["substation"]
        sp, sq = _pair(s.get("p"), (-INF, INF)), _pair(s.get("q"), (-INF, INF))
        substation = Substation(int(s["bus"]), float(costs.get("substation", 0.0)),
                                sp[0], sp[1], sq[0], sq[1])
        pd, qd = series.get("p_demand", {}), series.get("q_demand", {})
        zeros = [0.0] * grid.num_periods
        buses = tuple(
            Bus(int(b["id"]), float(b["v"][0]), float(b["v"][1]),
                _tuple(pd.get(str(b["id"]), zeros)), _tuple(qd.get(str(b["id"]), zeros)))
            for b in eps["buses"])
        branches = tuple(Branch(int(b["from"]), int(b["to"]), float(b["r"]), float(b["x"]),
                                _inf(b.get("l_max"))) for b in eps["branches"])
        devices = []
        for d in eps.get("devices", []):
            kind = d["kind"]
            if kind not in DEVICE_KINDS:
                raise CaseParseError(f"unknown device kind {kind!r}")
            p, q = _pair(d.get("p"), (0.0, 0.0)), _pair(d.get("q"), (0.0, 0.0))
            ramp = d.get("ramp", [None, None])
            kw: dict[str, Any] = dict(id=str(d["id"]), bus=int(d["bus"]), p_min=p[0], p_max=p[1],
                                      q_min=q[0], q_max=q[1], ramp_p=_inf(ramp[0]),
                                      ramp_q=_inf(ramp[1]), cost=float(costs.get(d["id"], 0.0)),
                                      p_init=d.get("p_init"), q_init=d.get("q_init"))
            if kind == "chp":
                kw.update(heat_ratio=float(d["heat_ratio"]), dhs_node=int(d["dhs_node"]))
            elif kind == "heat_pump":
                kw.update(cop=float(d["cop"]), dhs_node=int(d["dhs_node"]))
            elif kind == "wt":
                kw.update(q_ratio=float(d.get("q_ratio", 0.0)), forecast=_tuple(fc[d["id"]]))
            elif kind == "pv":
                kw.update(forecast=_tuple(fc[d["id"]]))
            devices.append(DEVICE_KINDS[kind](**kw))
        unit = dhs.get("pressure_unit", "Pa")
        if unit not in ("Pa", "m"):
            raise CaseParseError(f"unknown pressure unit {unit!r}")
        scale = constants.head_to_pressure if unit == "m" else 1.0
        hd = series.get("heat_demand", {})
        nodes = tuple(
            DhsNode(int(n["id"]), _tuple(hd.get(str(n["id"]), zeros)),
                    _pair(n.get("ts"), (70.0, 100.0)), _pair(n.get("tr"), (30.0, 70.0)),
                    tuple(scale * x for x in _pair(n.get("ps"), (0.0, 1e7))),
                    tuple(scale * x for x in _pair(n.get("pr"), (0.0, 1e7))),
                    _pair(n.get("m"), (0.0, 1e3)), float(n.get("hx_area", 0.0)),
                    float(n.get("minor_loss", 0.0)), _inf(n.get("max_drop")))
            for n in dhs["nodes"])
        pipes = []
        for p in dhs.get("pipes", []):
            pump = None
            if p.get("pump"):
                u = p["pump"]
                g1, g2, g3 = u["gamma"]
                pump = PumpSpec(float(g1), float(g2), float(g3), float(u["efficiency"]),
                                float(u["p_max"]), int(u["bus"]))
            ti = p.get("t_init")
            if ti is None:
                raise CaseParseError(f"pipe {p.get('from')}-{p.get('to')}: t_init is required")
            pipes.append(PipeSpec(int(p["from"]), int(p["to"]), float(p["length"]),
                                  float(p["diameter"]), float(p.get("roughness", 5e-4)),
                                  float(p.get("reynolds", 1e5)), float(p.get("conductivity", 0.3)),
                                  _pair(p.get("m"), (0.0, 500.0)), bool(p.get("valve", False)),
                                  pump, float(ti[0]), float(ti[1])))
        return Case(str(doc.get("name", "case")), constants, grid, float(eps.get("base_mva", 1.0)),
                    substation, buses, branches, tuple(devices), nodes, tuple(pipes),
                    _tuple(series.get("ground_temp", zeros)), dict(doc.get("meta", {})))
    except CaseParseError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CaseParseError(f"malformed case document: {exc!r}") from exc


def emit_case(case: Case, path: str | Path | None = None) -> str:
    text = json.dumps(case_to_dict(case), indent=1)
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_case(text: str) -> Case:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise CaseParseError("case document must be an object")
    return check_case(case_from_dict(doc))


BUNDLED = ("case33_30", "case5_4")


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise FileNotFoundError(f"no bundled case {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("chpd") / "data" / f"{name}.json"))


def load_case(path: str | Path) -> Case:
    """Load a case file; bundled names (``case33_30``, ``case5_4``) are accepted too."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise CaseParseError(f"cannot read {path}: {exc}") from exc
    return parse_case(text)


def bundled_case(name: str) -> Case:
    return load_case(bundled_path(name))


def with_horizon(case: Case, num_periods: int, step_length: float | None = None) -> Case:
    """Truncate every series to ``num_periods`` (and optionally relabel the step)."""
    from dataclasses import replace

    T = num_periods
    cut = lambda s: tuple(s[:T])  # noqa: E731
    return replace(
        case,
        grid=TimeGrid(step_length or case.grid.step_length, T),
        buses=tuple(replace(b, p_demand=cut(b.p_demand), q_demand=cut(b.q_demand)) for b in case.buses),
        devices=tuple(replace(d, forecast=cut(d.forecast)) if isinstance(d, (Pv, Wt)) else d
                      for d in case.devices),
        nodes=tuple(replace(n, heat_demand=cut(n.heat_demand)) for n in case.nodes),
        ground_temp=cut(case.ground_temp),
    )
