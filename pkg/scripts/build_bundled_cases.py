"""Regenerate the bundled cases in src/chpd/data/.

case33_30: the 33-bus 12.66 kV feeder (standard Baran-Wu impedances and
loads) coupled to a synthetic 30-node / 29-pipe heating network with 17
heat exchangers, 4 pumps and 4 pressure-reducing valves (total pipe length
6.6 km).  case5_4: a 5-bus feeder with one PV and one wind unit coupled to
a 4-node network.  All DHS parameters and every cost coefficient are
synthetic; they are chosen once here and frozen in the JSON files.

    python scripts/build_bundled_cases.py
"""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

from chpd.case import (
    Branch, Bus, Case, Chp, DhsNode, Generator, HeatPump, PhysicalConstants,
    PipeSpec, PumpSpec, Pv, Substation, TimeGrid, Wt, emit_case, parse_case,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "chpd" / "data"

# hourly shapes, peak = 1
ELEC = [0.62, 0.58, 0.56, 0.55, 0.57, 0.63, 0.72, 0.82, 0.90, 0.94, 0.96, 0.97,
        0.95, 0.93, 0.92, 0.93, 0.96, 1.00, 0.99, 0.95, 0.88, 0.80, 0.72, 0.66]
HEAT = [0.86, 0.89, 0.93, 0.96, 1.00, 0.97, 0.90, 0.80, 0.68, 0.58, 0.51, 0.47,
        0.45, 0.46, 0.49, 0.54, 0.61, 0.69, 0.76, 0.80, 0.82, 0.83, 0.84, 0.85]
SOLAR = [0, 0, 0, 0, 0, 0.03, 0.12, 0.28, 0.46, 0.63, 0.77, 0.86,
         0.88, 0.83, 0.72, 0.57, 0.39, 0.21, 0.07, 0.01, 0, 0, 0, 0]
WIND = [0.72, 0.75, 0.78, 0.74, 0.70, 0.66, 0.60, 0.52, 0.45, 0.40, 0.37, 0.35,
        0.38, 0.42, 0.47, 0.51, 0.56, 0.61, 0.66, 0.70, 0.73, 0.76, 0.78, 0.74]

# pump characteristic-curve coefficients (head in m, flow in m^3/s)
GAMMA = (99.02, 57.74, 2.156)

# 33-bus feeder: (from, to, r ohm, x ohm)
BARAN_WU_BRANCHES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]
# bus: (kW, kVAr)
BARAN_WU_LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20), 7: (200, 100),
    8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30), 12: (60, 35), 13: (60, 35),
    14: (120, 80), 15: (60, 10), 16: (60, 20), 17: (60, 20), 18: (90, 40), 19: (90, 40),
    20: (90, 40), 21: (90, 40), 22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200),
    26: (60, 25), 27: (60, 25), 28: (60, 20), 29: (120, 70), 30: (200, 600), 31: (150, 70),
    32: (210, 100), 33: (60, 40),
}

# 30-node heating tree (supply direction)
DHS30_EDGES = [
    (1, 2), (2, 3), (2, 17), (3, 4), (3, 10), (4, 5), (5, 6), (5, 8), (6, 7), (8, 9),
    (10, 11), (10, 13), (11, 12), (17, 18), (17, 24), (18, 19), (19, 20), (19, 22),
    (20, 21), (22, 23), (24, 25), (25, 26), (25, 28), (26, 27), (28, 29), (29, 30),
    (13, 14), (14, 15), (14, 16),
]
DHS30_EXCHANGERS = [6, 7, 8, 9, 11, 12, 15, 16, 18, 20, 21, 22, 23, 26, 27, 28, 30]
DHS30_PUMPS = {(1, 2): 7, (2, 17): 12, (3, 10): 29, (17, 24): 32}   # pipe -> EPS bus
DHS30_VALVES = [(5, 8), (14, 16), (19, 22), (25, 26)]
DHS30_HEAT_WEIGHTS = [0.52, 0.74, 0.61, 0.85, 0.48, 0.69, 0.77, 0.58, 0.66, 0.92,
                      0.55, 0.71, 0.63, 0.80, 0.57, 0.74, 0.59]

# design parameters (synthetic)
T_SUPPLY_MAX = 100.0      # degC at the source
T_SUPPLY_MIN = 60.0       # degC, minimum user supply temperature
T_RETURN_MIN = 30.0       # degC at exchangers
T_RETURN_MAX = 70.0
T_RETURN_FLOOR = 20.0     # degC, return bound at junctions and sources
HX_MAX_DROP = 58.0        # K, exchanger design temperature drop
T_SUPPLY_INIT = 95.0      # degC, initial pipe temperatures
T_RETURN_INIT = 35.0
PUMP_EFFICIENCY = 0.5
DESIGN_DT = 30.0          # K, temperature difference used to size pipes
DESIGN_VELOCITY = 1.6     # m/s at the design flow
FLOW_MARGIN = 1.6         # pipe flow bound relative to the design flow
CONDUCTIVITY = 0.6        # W/m/K
GROUND = 8.0              # degC


def _depths(edges, root=1):
    children = defaultdict(list)
    for a, b in edges:
        children[a].append(b)
    depth = {root: 0}
    stack = [root]
    while stack:
        k = stack.pop()
        for c in children[k]:
            depth[c] = depth[k] + 1
            stack.append(c)
    return depth, children


def _subtree_sum(children, values, k):
    return values.get(k, 0.0) + sum(_subtree_sum(children, values, c) for c in children[k])


def _round(x, nd=4):
    return float(round(x, nd))


def build_dhs(edges, exchangers, heat_peaks, heat_shape, pumps, valves, lengths, T,
              trunk=None, pump_gammas=None, velocity=DESIGN_VELOCITY):
    """Nodes and pipes of a radial network sized from the peak heat demand.

    Exchangers are limited to a temperature drop of ``HX_MAX_DROP``, which
    leaves ``T_SUPPLY_MAX - T_RETURN_MIN - HX_MAX_DROP`` kelvin for transport
    losses on the way to every exchanger.
    """
    depth, children = _depths(edges)
    cw = 4182.0
    design_flow = {k: heat_peaks[k] * 1e6 / (cw * DESIGN_DT) for k in exchangers}

    geometry = {}
    for (a, b) in edges:
        q = _subtree_sum(children, design_flow, b)
        D = max(0.05, round(math.sqrt(4 * q / (1000.0 * math.pi * velocity)), 3))
        L = lengths[(a, b)]
        if trunk and (a, b) == trunk[0]:
            L, D = trunk[1], trunk[2]
        geometry[(a, b)] = (L, D, q)

    nodes = []
    for k in sorted(depth):
        is_hx = k in exchangers
        demand = tuple(_round(heat_peaks[k] * s, 6) for s in heat_shape) if is_hx else (0.0,) * T
        ts = (T_SUPPLY_MIN, T_SUPPLY_MAX)
        tr = (T_RETURN_MIN if is_hx else T_RETURN_FLOOR, T_RETURN_MAX)
        if k == 1:
            ps = (200e3, 260e3)
            m = (0.0, FLOW_MARGIN * sum(design_flow.values()))
        else:
            ps = (150e3, 1500e3)
            m = (0.0, FLOW_MARGIN * design_flow.get(k, 0.0))
        pr = (150e3, 1500e3)
        hx_area = minor = 0.0
        if is_hx:
            # exchanger sized for ~40 kPa minor loss at the design flow
            minor = 10.0
            hx_area = _round(design_flow[k] * math.sqrt(minor / (2 * 1000.0 * 40e3)), 6)
        nodes.append(DhsNode(k, demand, ts, tr, ps, pr, m, hx_area, minor,
                             HX_MAX_DROP if is_hx else math.inf))
    pipes = []
    for (a, b) in edges:
        L, D, q = geometry[(a, b)]
        pump = None
        if (a, b) in pumps:
            g = (pump_gammas or {}).get((a, b), GAMMA)
            pump = PumpSpec(g[0], g[1], g[2], PUMP_EFFICIENCY, 0.5, pumps[(a, b)])
        pipes.append(PipeSpec(a, b, L, D, 5e-4, 1e5, CONDUCTIVITY,
                              (0.0, _round(FLOW_MARGIN * q, 3)), (a, b) in valves, pump,
                              T_SUPPLY_INIT, T_RETURN_INIT))
    return tuple(nodes), tuple(pipes)


def case33_30() -> Case:
    T = 24
    base_kv, base_mva = 12.66, 10.0
    zb = base_kv**2 / base_mva
    buses = []
    for j in range(1, 34):
        p, q = BARAN_WU_LOADS.get(j, (0, 0))
        buses.append(Bus(j, 0.81, 1.21,
                         tuple(_round(p / 1e3 * s, 6) for s in ELEC),
                         tuple(_round(q / 1e3 * s, 6) for s in ELEC)))
    branches = tuple(Branch(a, b, _round(r / zb, 8), _round(x / zb, 8), 9.0)
                     for a, b, r, x in BARAN_WU_BRANCHES)
    devices = (
        Generator(id="G1", bus=18, p_min=0.0, p_max=1.0, q_min=-0.5, q_max=0.5,
                  ramp_p=0.5, ramp_q=0.5, cost=70.0, p_init=0.0, q_init=0.0),
        Chp(id="CHP1", bus=22, p_min=0.5, p_max=3.0, q_min=-1.0, q_max=1.5, ramp_p=1.0,
            ramp_q=1.0, cost=40.0, heat_ratio=1.3, dhs_node=1, p_init=2.0, q_init=0.0),
        HeatPump(id="HP1", bus=19, p_min=0.0, p_max=3.0, ramp_p=1.5, cost=0.0, cop=3.2,
                 dhs_node=1, p_init=2.0),
        Pv(id="PV1", bus=14, p_min=0.0, p_max=1.0, forecast=tuple(_round(1.0 * s) for s in SOLAR)),
        Wt(id="WT1", bus=30, p_min=0.0, p_max=1.2, q_ratio=0.2,
           forecast=tuple(_round(1.2 * s) for s in WIND)),
    )
    w = DHS30_HEAT_WEIGHTS
    scale = 11.44 / sum(w)
    peaks = {k: wk * scale for k, wk in zip(DHS30_EXCHANGERS, w)}
    # lengths sum to 6.6 km; the trunk (1, 2) is the validation pipe
    base = [180, 240, 200, 260, 150, 210, 230, 190, 170, 220, 250, 160, 200, 240, 180,
            260, 210, 190, 230, 170, 200, 250, 220, 180, 240, 210, 230, 190]
    lengths = {e: float(L) for e, L in zip(DHS30_EDGES[1:], base)}
    lengths[(1, 2)] = 6600.0 - sum(base)
    nodes, pipes = build_dhs(DHS30_EDGES, DHS30_EXCHANGERS, peaks, HEAT, DHS30_PUMPS,
                             DHS30_VALVES, lengths, T, trunk=((1, 2), lengths[(1, 2)], 0.3))
    meta = {
        "description": "33-bus feeder + 30-node heating network (synthetic DHS data)",
        "validation_pipe": "1-2",
    }
    return Case("case33_30", PhysicalConstants(), TimeGrid(3600.0, T), base_mva,
                Substation(1, 50.0, 0.0, 10.0, -5.0, 5.0), tuple(buses), branches, devices,
                nodes, pipes, (GROUND,) * T, meta)


def case5_4() -> Case:
    T = 24
    base_mva = 10.0
    loads = {2: (0.45, 0.20), 3: (0.40, 0.18), 4: (0.35, 0.15), 5: (0.35, 0.12)}
    buses = []
    for j in range(1, 6):
        p, q = loads.get(j, (0, 0))
        buses.append(Bus(j, 0.81, 1.21, tuple(_round(p * s, 6) for s in ELEC),
                         tuple(_round(q * s, 6) for s in ELEC)))
    branches = (Branch(1, 2, 0.003, 0.002, 4.0), Branch(2, 3, 0.004, 0.003, 4.0),
                Branch(3, 4, 0.005, 0.003, 4.0), Branch(2, 5, 0.006, 0.004, 4.0))
    devices = (
        Chp(id="CHP1", bus=3, p_min=0.2, p_max=0.8, q_min=-0.3, q_max=0.5, ramp_p=0.4,
            ramp_q=0.4, cost=40.0, heat_ratio=1.3, dhs_node=1, p_init=0.5, q_init=0.0),
        HeatPump(id="HP1", bus=2, p_min=0.0, p_max=0.8, ramp_p=0.5, cost=0.0, cop=3.2,
                 dhs_node=1, p_init=0.4),
        Pv(id="PV1", bus=4, p_min=0.0, p_max=0.4, forecast=tuple(_round(0.4 * s) for s in SOLAR)),
        Wt(id="WT1", bus=5, p_min=0.0, p_max=0.3, q_ratio=0.2,
           forecast=tuple(_round(0.3 * s) for s in WIND)),
    )
    edges = [(1, 2), (2, 3), (2, 4)]
    peaks = {3: 1.36, 4: 1.10}
    lengths = {(1, 2): 600.0, (2, 3): 400.0, (2, 4): 350.0}
    nodes, pipes = build_dhs(edges, [3, 4], peaks, HEAT, {(1, 2): 3}, [], lengths, T,
                             velocity=2.0)
    meta = {"description": "5-bus feeder + 4-node heating network (synthetic)",
            "validation_pipe": "1-2"}
    return Case("case5_4", PhysicalConstants(), TimeGrid(3600.0, T), base_mva,
                Substation(1, 50.0, 0.0, 5.0, -3.0, 3.0), tuple(buses), branches, devices,
                nodes, pipes, (GROUND,) * T, meta)


def write(case: Case, flows: dict | None = None) -> Path:
    if flows:
        case.meta["constant_flow"] = flows
    path = DATA / f"{case.name}.json"
    text = emit_case(case)
    parse_case(text)   # validates
    path.write_text(text)
    return path


# constant-flow benchmark settings (total source flow, kg/s) relative to the
# design flow (peak demand at DESIGN_DT); the low one lies below the
# feasibility threshold
FLOW_SETTINGS = {"high": 1.0, "mid": 0.75, "low": 0.45}


def constant_flow_settings(case: Case) -> dict[str, float]:
    design = sum(max(n.heat_demand) for n in case.exchangers) * 1e6 / (4182.0 * DESIGN_DT)
    return {k: _round(f * design, 3) for k, f in FLOW_SETTINGS.items()}


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    for build in (case33_30, case5_4):
        c = build()
        print(write(c, constant_flow_settings(c)))
