"""Static hydraulic model of the heating network.

Pressures are carried in kPa inside the program (case files hold Pa), flows
in kg/s, pump power in MW.  Pipe flow direction is fixed by the topology:
supply water runs ``from_node -> to_node`` and return water the other way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .case import Case, PhysicalConstants, PipeSpec
from .conic import EQ, ConicProgram, LinExpr, Solution, key
from .relaxation import BilinearRegistry, pump_region_coefficients
from .residuals import ResidualReport

KPA = 1e3


class HydraulicsError(ValueError):
    pass


def friction_factor(diameter: float, roughness: float, reynolds: float) -> float:
    arg = roughness / (3.7 * diameter) + 5.74 / reynolds**0.9
    if arg <= 0 or arg == 1.0:
        raise HydraulicsError(f"friction factor undefined: log argument {arg}")
    return 1.325 / math.log(arg) ** 2


def friction_coefficient(pipe: PipeSpec, constants: PhysicalConstants) -> float:
    """Major-loss coefficient mu (Pa s^2 / kg^2): ``dp = mu m^2``."""
    if not (pipe.length > 0 and pipe.diameter > 0 and pipe.reynolds > 0):
        raise HydraulicsError(f"pipe {pipe.key}: length, diameter and Re must be positive")
    c = constants
    f = friction_factor(pipe.diameter, pipe.roughness, pipe.reynolds)
    return f * c.head_to_pressure * 8 * pipe.length / (
        pipe.diameter**5 * c.water_density**2 * math.pi**2 * c.gravity)


def minor_loss_coefficient(minor_loss: float, area: float, constants: PhysicalConstants) -> float:
    """Minor-loss coefficient (Pa s^2 / kg^2) of a heat exchanger."""
    c = constants
    return minor_loss * c.head_to_pressure / (2 * c.gravity * c.water_density**2 * area**2)


def pump_power_coefficient(efficiency: float, density: float) -> float:
    """c in ``P[MW] = c * m[kg/s] * rise[kPa]``."""
    return KPA / (efficiency * density * 1e6)


@dataclass
class HydraulicVarHandles:
    m: dict[tuple[str, int], int] = field(default_factory=dict)
    m_in: dict[tuple[int, int], int] = field(default_factory=dict)
    m_out: dict[tuple[int, int], int] = field(default_factory=dict)
    ps: dict[tuple[int, int], int] = field(default_factory=dict)
    pr: dict[tuple[int, int], int] = field(default_factory=dict)
    dp_valve: dict[tuple[str, int], int] = field(default_factory=dict)
    dp_pump: dict[tuple[str, int], int] = field(default_factory=dict)
    dp_control: dict[tuple[int, int], int] = field(default_factory=dict)
    p_pump: dict[tuple[str, int], int] = field(default_factory=dict)


def flow_names(case: Case) -> list[str]:
    """Names of every flow variable (pipe, injection, outflow) of a case."""
    out = []
    src = set(case.source_nodes)
    for t in range(case.T):
        out += [key("m", p.key, t) for p in case.pipes]
        out += [key("min", k, t) for k in sorted(src)]
        out += [key("mout", n.id, t) for n in case.exchangers]
    return out


def build_hydraulic_relations(case: Case, program: ConicProgram,
                              registry: BilinearRegistry) -> HydraulicVarHandles:
    c = case.constants
    h = HydraulicVarHandles()
    sources = set(case.source_nodes)
    anchor = case.anchor_node
    for p in case.pumps:
        if p.pump.bus not in {b.id for b in case.buses}:
            raise HydraulicsError(f"pump on {p.key} has no EPS coupling bus")
    mu = {p.key: friction_coefficient(p, c) / KPA for p in case.pipes}

    for t in range(case.T):
        for p in case.pipes:
            h.m[(p.key, t)] = program.add_var(key("m", p.key, t), *p.m_bounds)
        for n in case.nodes:
            k = n.id
            ps_lo, ps_hi = (v / KPA for v in n.ps_bounds)
            pr_lo, pr_hi = (v / KPA for v in n.pr_bounds)
            h.ps[(k, t)] = program.add_var(key("ps", k, t), ps_lo, ps_hi)
            h.pr[(k, t)] = program.add_var(key("pr", k, t), pr_lo, pr_lo if k == anchor else pr_hi)
            if k in sources:
                h.m_in[(k, t)] = program.add_var(key("min", k, t), *n.m_bounds)
            if n.is_exchanger:
                h.m_out[(k, t)] = program.add_var(key("mout", k, t), *n.m_bounds)
                h.dp_control[(k, t)] = program.add_var(key("dpc", k, t), 0.0, ps_hi - pr_lo)

        # continuity: m_in - m_out = sum_out m_kl - sum_in m_jk
        for n in case.nodes:
            k = n.id
            e = LinExpr()
            if (k, t) in h.m_in:
                e.add_term(h.m_in[(k, t)], 1.0)
            if (k, t) in h.m_out:
                e.add_term(h.m_out[(k, t)], -1.0)
            for p in case.pipes_out_of(k):
                e.add_term(h.m[(p.key, t)], -1.0)
            for p in case.pipes_into(k):
                e.add_term(h.m[(p.key, t)], 1.0)
            program.add_constraint(e, EQ, 0.0, "dhs:continuity")

        for p in case.pipes:
            k, l = p.from_node, p.to_node
            m = h.m[(p.key, t)]
            ps_k, ps_l = h.ps[(k, t)], h.ps[(l, t)]
            if p.pump is not None:
                u = p.pump
                a, b = pump_region_coefficients(u.gamma1, u.gamma2, c.head_to_pressure,
                                                c.water_density, KPA)
                rise = program.add_var(key("dpw", p.key, t), 0.0, a)
                h.dp_pump[(p.key, t)] = rise
                program.add_constraint(LinExpr.of((ps_l, 1.0), (ps_k, -1.0), (rise, -1.0)), EQ, 0.0,
                                       "dhs:pump-rise")
                registry.register_pump(rise, m, a, b, f"pump:{p.key},{t}")
                pw = program.add_var(key("Pwp", p.key, t), 0.0, u.p_max)
                h.p_pump[(p.key, t)] = pw
                registry.register(program, pw, m, rise, pump_power_coefficient(u.efficiency, c.water_density),
                                  "pump-power", f"pump:{p.key},{t}")
            elif p.valve:
                dv = program.add_var(key("dpv", p.key, t), 0.0)
                h.dp_valve[(p.key, t)] = dv
                program.add_constraint(LinExpr.of((dv, 1.0), (ps_k, -1.0), (ps_l, 1.0)), EQ, 0.0,
                                       "dhs:valve")
            else:
                registry.register_quadratic(LinExpr.of((ps_k, 1.0), (ps_l, -1.0)), mu[p.key], m,
                                            "major-supply", f"sup:{p.key},{t}")
            # return water flows l -> k
            registry.register_quadratic(LinExpr.of((h.pr[(l, t)], 1.0), (h.pr[(k, t)], -1.0)),
                                        mu[p.key], m, "major-return", f"ret:{p.key},{t}")

        for n in case.exchangers:
            k = n.id
            lhs = LinExpr.of((h.ps[(k, t)], 1.0), (h.pr[(k, t)], -1.0), (h.dp_control[(k, t)], -1.0))
            if n.minor_loss > 0:
                kappa = minor_loss_coefficient(n.minor_loss, n.hx_area, c) / KPA
                registry.register_quadratic(lhs, kappa, h.m_out[(k, t)], "minor", f"minor:{k},{t}")
            else:
                program.add_constraint(lhs, EQ, 0.0, "dhs:minor")
    return h


def hydraulic_residuals(case: Case, solution: Solution | dict) -> ResidualReport:
    """Residuals of the original hydraulic equalities (kPa / kg/s / MW).

    Pressure-loss residuals are ``mu m^2 - drop`` so a relaxed point shows
    nonpositive values (drop over-satisfied).
    """
    val = solution.values() if isinstance(solution, Solution) else solution
    c = case.constants
    rep = ResidualReport()
    g = lambda *a: val.get(key(*a), 0.0)  # noqa: E731
    sources = set(case.source_nodes)
    for t in range(case.T):
        for n in case.nodes:
            k = n.id
            e = (g("min", k, t) if k in sources else 0.0) - (g("mout", k, t) if n.is_exchanger else 0.0)
            e -= sum(g("m", p.key, t) for p in case.pipes_out_of(k))
            e += sum(g("m", p.key, t) for p in case.pipes_into(k))
            rep.add("dhs:continuity", f"{k},{t}", e, 1.0)
        for p in case.pipes:
            k, l = p.from_node, p.to_node
            m = g("m", p.key, t)
            mu = friction_coefficient(p, c) / KPA
            loss = mu * m * m
            if p.pump is not None:
                u = p.pump
                a, b = pump_region_coefficients(u.gamma1, u.gamma2, c.head_to_pressure, c.water_density, KPA)
                rise = g("dpw", p.key, t)
                rep.add("dhs:pump-rise", f"{p.key},{t}", rise - (g("ps", l, t) - g("ps", k, t)), max(abs(rise), 1.0))
                rep.add("dhs:pump-region", f"{p.key},{t}", max(0.0, rise - (a - b * m * m)), a)
                pw = g("Pwp", p.key, t)
                exact = pump_power_coefficient(u.efficiency, c.water_density) * m * rise
                # in kW so the 1-unit scale floor means 1 kW
                rep.add("dhs:pump-power", f"{p.key},{t}", 1e3 * (pw - exact), 1e3 * abs(exact))
            elif p.valve:
                dv = g("dpv", p.key, t)
                rep.add("dhs:valve", f"{p.key},{t}", dv - (g("ps", k, t) - g("ps", l, t)), max(abs(dv), 1.0))
                rep.add("dhs:valve-sign", f"{p.key},{t}", min(0.0, dv), 1.0)
            else:
                drop = g("ps", k, t) - g("ps", l, t)
                rep.add("dhs:major-supply", f"{p.key},{t}", loss - drop, max(loss, 1.0))
            drop = g("pr", l, t) - g("pr", k, t)
            rep.add("dhs:major-return", f"{p.key},{t}", loss - drop, max(loss, 1.0))
        for n in case.exchangers:
            k = n.id
            m = g("mout", k, t)
            kappa = minor_loss_coefficient(n.minor_loss, n.hx_area, c) / KPA
            lhs = g("ps", k, t) - g("pr", k, t) - g("dpc", k, t)
            rep.add("dhs:minor", f"{k},{t}", kappa * m * m - lhs, max(kappa * m * m, 1.0))
            rep.add("dhs:control-sign", f"{k},{t}", min(0.0, g("dpc", k, t)), 1.0)
    return rep
