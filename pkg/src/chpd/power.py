"""Branch-flow model of the radial distribution feeder.

Branch quantities (P_ij, Q_ij, l_ij, v_j) live in per unit on ``case.base_mva``;
device outputs are in MW / MVAr and are scaled into the nodal balances.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .case import Case, Chp, Generator, HeatPump, Pv, Wt
from .conic import EQ, LE, ConicProgram, LinExpr, Solution, key
from .residuals import ResidualReport


class PowerModelError(ValueError):
    pass


@dataclass
class PowerVarHandles:
    v: dict[tuple[int, int], int] = field(default_factory=dict)
    P: dict[tuple[str, int], int] = field(default_factory=dict)
    Q: dict[tuple[str, int], int] = field(default_factory=dict)
    l: dict[tuple[str, int], int] = field(default_factory=dict)
    p_dev: dict[tuple[str, int], int] = field(default_factory=dict)
    q_dev: dict[tuple[str, int], int] = field(default_factory=dict)
    p_sub: dict[int, int] = field(default_factory=dict)
    q_sub: dict[int, int] = field(default_factory=dict)
    p_pump: dict[tuple[str, int], int] = field(default_factory=dict)
    cost: LinExpr = field(default_factory=LinExpr)


def _device_q(d) -> bool:
    return not isinstance(d, HeatPump)


def _consumes(d) -> bool:
    return isinstance(d, HeatPump)


def build_power_constraints(case: Case, program: ConicProgram) -> PowerVarHandles:
    """Add the SOC branch-flow model; pump powers must already exist as ``Pwp[k-l,t]``."""
    T = case.T
    S = case.base_mva
    hours = case.grid.hours
    h = PowerVarHandles()
    root = case.substation.bus
    for b in case.buses:
        if len(b.p_demand) != T or len(b.q_demand) != T:
            raise PowerModelError(f"bus {b.id}: demand series length differs from T={T}")
    for d in case.devices:
        if isinstance(d, (Pv, Wt)) and len(d.forecast) != T:
            raise PowerModelError(f"device {d.id}: forecast length differs from T={T}")

    for t in range(T):
        for p in case.pumps:
            name = key("Pwp", p.key, t)
            if name not in program.index:
                raise PowerModelError(f"pump power handle {name} missing; build hydraulics first")
            h.p_pump[(p.key, t)] = program.index[name]

        for b in case.buses:
            lo, hi = (1.0, 1.0) if b.id == root else (b.v_min, b.v_max)
            h.v[(b.id, t)] = program.add_var(key("v", b.id, t), lo, hi)
        for br in case.branches:
            k = br.key
            h.P[(k, t)] = program.add_var(key("Pbr", k, t))
            h.Q[(k, t)] = program.add_var(key("Qbr", k, t))
            h.l[(k, t)] = program.add_var(key("l", k, t), 0.0, br.l_max)
        s = case.substation
        h.p_sub[t] = program.add_var(key("Psub", t), s.p_min, s.p_max)
        h.q_sub[t] = program.add_var(key("Qsub", t), s.q_min, s.q_max)
        for d in case.devices:
            if isinstance(d, Pv):
                lo, hi = min(d.p_min, d.forecast[t]), d.forecast[t]
                h.p_dev[(d.id, t)] = program.add_var(key("Pdev", d.id, t), lo, hi)
                h.q_dev[(d.id, t)] = program.add_var(key("Qdev", d.id, t), 0.0, 0.0)
            elif isinstance(d, Wt):
                lo, hi = min(d.p_min, d.forecast[t]), d.forecast[t]
                h.p_dev[(d.id, t)] = program.add_var(key("Pdev", d.id, t), lo, hi)
                h.q_dev[(d.id, t)] = program.add_var(key("Qdev", d.id, t))
                program.add_constraint(program.x(h.q_dev[(d.id, t)]) - program.x(h.p_dev[(d.id, t)], d.q_ratio),
                                       EQ, 0.0, "eps:wt-q")
            else:
                h.p_dev[(d.id, t)] = program.add_var(key("Pdev", d.id, t), d.p_min, d.p_max)
                if _device_q(d):
                    h.q_dev[(d.id, t)] = program.add_var(key("Qdev", d.id, t), d.q_min, d.q_max)

        # nodal balances: sum_out P_jk - sum_in (P_ij - r l_ij) = injection_j
        inj_p: dict[int, LinExpr] = defaultdict(LinExpr)
        inj_q: dict[int, LinExpr] = defaultdict(LinExpr)
        for b in case.buses:
            inj_p[b.id] = LinExpr(const=-b.p_demand[t] / S)
            inj_q[b.id] = LinExpr(const=-b.q_demand[t] / S)
        inj_p[root].add_term(h.p_sub[t], 1.0 / S)
        inj_q[root].add_term(h.q_sub[t], 1.0 / S)
        for d in case.devices:
            sign = -1.0 if _consumes(d) else 1.0
            inj_p[d.bus].add_term(h.p_dev[(d.id, t)], sign / S)
            if (d.id, t) in h.q_dev:
                inj_q[d.bus].add_term(h.q_dev[(d.id, t)], 1.0 / S)
        for p in case.pumps:
            inj_p[p.pump.bus].add_term(h.p_pump[(p.key, t)], -1.0 / S)
        flow_p: dict[int, LinExpr] = defaultdict(LinExpr)
        flow_q: dict[int, LinExpr] = defaultdict(LinExpr)
        for br in case.branches:
            k = br.key
            flow_p[br.from_bus].add_term(h.P[(k, t)], 1.0)
            flow_q[br.from_bus].add_term(h.Q[(k, t)], 1.0)
            flow_p[br.to_bus].add_term(h.P[(k, t)], -1.0).add_term(h.l[(k, t)], br.r)
            flow_q[br.to_bus].add_term(h.Q[(k, t)], -1.0).add_term(h.l[(k, t)], br.x)
        for b in case.buses:
            program.add_constraint(flow_p[b.id] - inj_p[b.id], EQ, 0.0, "eps:bal-p")
            program.add_constraint(flow_q[b.id] - inj_q[b.id], EQ, 0.0, "eps:bal-q")

        for br in case.branches:
            k = br.key
            vi, vj = h.v[(br.from_bus, t)], h.v[(br.to_bus, t)]
            e = LinExpr.of((vj, 1.0), (vi, -1.0), (h.P[(k, t)], 2 * br.r), (h.Q[(k, t)], 2 * br.x),
                           (h.l[(k, t)], -(br.r**2 + br.x**2)))
            program.add_constraint(e, EQ, 0.0, "eps:vdrop")
            program.add_cone([
                LinExpr.of((h.l[(k, t)], 1.0), (vi, 1.0)),
                LinExpr.of((h.P[(k, t)], 2.0)),
                LinExpr.of((h.Q[(k, t)], 2.0)),
                LinExpr.of((h.l[(k, t)], 1.0), (vi, -1.0)),
            ], "eps:soc")

    # ramps, with the case-supplied initial output before t = 0
    for d in case.devices:
        if not isinstance(d, (Generator, Chp, HeatPump)):
            continue
        for handles, ramp, init in ((h.p_dev, d.ramp_p, d.initial_p),
                                    (h.q_dev, d.ramp_q, d.initial_q)):
            if ramp == float("inf") or (d.id, 0) not in handles:
                continue
            lim = ramp * hours
            for t in range(T):
                cur = program.x(handles[(d.id, t)])
                prev = program.x(handles[(d.id, t - 1)]) if t else LinExpr(const=init)
                program.add_constraint(cur - prev, LE, lim, "eps:ramp")
                program.add_constraint(prev - cur, LE, lim, "eps:ramp")

    cost = LinExpr()
    for t in range(T):
        if case.substation.cost:
            cost.add_term(h.p_sub[t], hours * case.substation.cost)
        for d in case.devices:
            if d.cost:
                cost.add_term(h.p_dev[(d.id, t)], hours * d.cost)
    h.cost = cost
    return h


def operating_cost(case: Case, values) -> float:
    hours = case.grid.hours
    total = 0.0
    for t in range(case.T):
        total += hours * case.substation.cost * values[key("Psub", t)]
        for d in case.devices:
            if d.cost:
                total += hours * d.cost * values[key("Pdev", d.id, t)]
    return total


def power_residuals(case: Case, solution: Solution | dict) -> ResidualReport:
    """Residuals of the branch-flow equalities (balances in MW / MVAr).

    The family ``eps:soc-slack`` holds ``l v - P^2 - Q^2`` per branch (p.u.);
    it is informational (the cone relaxes this equality).  ``eps:flow`` is
    the same quantity checked with scale ``l v`` (so relative on heavily
    loaded branches and absolute, in p.u.^2, on light ones).
    """
    val = solution.values() if isinstance(solution, Solution) else solution
    S = case.base_mva
    rep = ResidualReport()
    root = case.substation.bus
    for t in range(case.T):
        bal_p = {b.id: -b.p_demand[t] for b in case.buses}
        bal_q = {b.id: -b.q_demand[t] for b in case.buses}
        bal_p[root] += val.get(key("Psub", t), 0.0)
        bal_q[root] += val.get(key("Qsub", t), 0.0)
        for d in case.devices:
            p = val.get(key("Pdev", d.id, t), 0.0)
            bal_p[d.bus] += -p if _consumes(d) else p
            bal_q[d.bus] += val.get(key("Qdev", d.id, t), 0.0)
            if isinstance(d, Wt):
                rep.add("eps:wt-q", f"{d.id},{t}", val.get(key("Qdev", d.id, t), 0.0) - d.q_ratio * p)
            if isinstance(d, (Pv, Wt)):
                rep.add("eps:curtail", f"{d.id},{t}", max(0.0, p - d.forecast[t]))
        for pp in case.pumps:
            bal_p[pp.pump.bus] -= val.get(key("Pwp", pp.key, t), 0.0)
        for br in case.branches:
            k = br.key
            P, Q, l = (val.get(key(n, k, t), 0.0) for n in ("Pbr", "Qbr", "l"))
            bal_p[br.from_bus] -= S * P
            bal_q[br.from_bus] -= S * Q
            bal_p[br.to_bus] += S * (P - br.r * l)
            bal_q[br.to_bus] += S * (Q - br.x * l)
            vi, vj = val.get(key("v", br.from_bus, t), 0.0), val.get(key("v", br.to_bus, t), 0.0)
            rep.add("eps:vdrop", f"{k},{t}",
                    vj - vi + 2 * (br.r * P + br.x * Q) - (br.r**2 + br.x**2) * l)
            slack = l * vi - (P * P + Q * Q)
            rep.add("eps:soc-slack", f"{k},{t}", slack, checked=False)
            rep.add("eps:flow", f"{k},{t}", slack, l * vi)
        for b in case.buses:
            rep.add("eps:bal-p", f"{b.id},{t}", bal_p[b.id])
            rep.add("eps:bal-q", f"{b.id},{t}", bal_q[b.id])
    return rep
