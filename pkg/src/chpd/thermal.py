"""Thermal side of the heating network for optimization.

Every product of a flow and a temperature difference is registered as a
bilinear term ``z = c * m * d`` where ``d`` is an auxiliary difference
variable tied to two temperatures by a linear row.  Nodal mixing uses the
difference form ``sum_s m_s (T_node - T_s) = 0`` (one term per stream), so a
node fed by a single stream reduces to the linear identity ``T_node = T_s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .case import Case, Chp, HeatPump, PipeSpec
from .conic import EQ, ConicProgram, LinExpr, Solution, key
from .relaxation import BilinearRegistry
from .residuals import ResidualReport


class ThermalError(ValueError):
    pass


MW = 1e-6


@dataclass
class ThermalVarHandles:
    ts: dict = field(default_factory=dict)
    tr: dict = field(default_factory=dict)
    ts_in: dict = field(default_factory=dict)
    tr_out: dict = field(default_factory=dict)
    pipe_ts_in: dict = field(default_factory=dict)
    pipe_ts_out: dict = field(default_factory=dict)
    pipe_ts_avg: dict = field(default_factory=dict)
    pipe_tr_in: dict = field(default_factory=dict)
    pipe_tr_out: dict = field(default_factory=dict)
    pipe_tr_avg: dict = field(default_factory=dict)
    heat: dict = field(default_factory=dict)


def std_coefficients(pipe: PipeSpec, case: Case) -> tuple[float, float]:
    """(dt / M, k dt) of the discrete advection-loss balance, M = A rho L."""
    c = case.constants
    dt = case.grid.step_length
    M = pipe.water_mass(c.water_density)
    k = pipe.conductivity / (pipe.area * c.water_density * c.specific_heat)
    return dt / M, k * dt


def _span(*boxes: tuple[float, float]) -> tuple[float, float]:
    return min(b[0] for b in boxes), max(b[1] for b in boxes)


def mixing_streams(case: Case, node: int, side: str) -> list[tuple[str, str, str]]:
    """Streams entering ``node`` on ``side`` ('S' or 'R').

    Each entry is (stream label, flow var base+key, temperature var base+key)
    encoded as name templates with ``{t}`` left for the period.
    """
    out = []
    n = case.node(node)
    if side == "S":
        if node in case.source_nodes:
            out.append(("in", f"min[{node},{{t}}]", f"tsin[{node},{{t}}]"))
        for p in case.pipes_into(node):
            out.append((p.key, f"m[{p.key},{{t}}]", f"tso[{p.key},{{t}}]"))
    else:
        if n.is_exchanger:
            out.append(("out", f"mout[{node},{{t}}]", f"trout[{node},{{t}}]"))
        for p in case.pipes_out_of(node):
            out.append((p.key, f"m[{p.key},{{t}}]", f"tro[{p.key},{{t}}]"))
    return out


def bilinear_count(case: Case) -> int:
    """Closed-form count of registered bilinear terms over the horizon."""
    per = 2 * len(case.pipes) + len(case.exchangers) + len(case.source_nodes) + len(case.pumps)
    for n in case.nodes:
        for side in "SR":
            s = len(mixing_streams(case, n.id, side))
            per += s if s >= 2 else 0
    return per * case.T


def build_thermal_relations(case: Case, program: ConicProgram,
                            registry: BilinearRegistry) -> ThermalVarHandles:
    c = case.constants
    cw = c.specific_heat * MW
    h = ThermalVarHandles()
    sources = set(case.source_nodes)
    idx = program.index

    def var(name: str) -> int:
        if name not in idx:
            raise ThermalError(f"handle {name} missing; build hydraulics and power first")
        return idx[name]

    def diff(name: str, a: int, b: int) -> int:
        """New variable d = x_a - x_b with bounds implied by the boxes."""
        lo = program.lb[a] - program.ub[b]
        hi = program.ub[a] - program.lb[b]
        d = program.add_var(name, lo, hi)
        program.add_constraint(LinExpr.of((d, 1.0), (a, -1.0), (b, 1.0)), EQ, 0.0, "dhs:diff")
        return d

    for p in case.pipes:
        if p.ts_init is None or p.tr_init is None:
            raise ThermalError(f"pipe {p.key}: initial temperatures are required")

    for t in range(case.T):
        for n in case.nodes:
            k = n.id
            h.ts[(k, t)] = program.add_var(key("ts", k, t), *n.ts_bounds)
            h.tr[(k, t)] = program.add_var(key("tr", k, t), *n.tr_bounds)
            if k in sources:
                h.ts_in[(k, t)] = program.add_var(key("tsin", k, t), *n.ts_bounds)
            if n.is_exchanger:
                h.tr_out[(k, t)] = program.add_var(key("trout", k, t), *n.tr_bounds)
        for p in case.pipes:
            nk, nl = case.node(p.from_node), case.node(p.to_node)
            sbox = _span(nk.ts_bounds, nl.ts_bounds)
            rbox = _span(nk.tr_bounds, nl.tr_bounds)
            kk = p.key
            h.pipe_ts_in[(kk, t)] = program.add_var(key("tsi", kk, t), *nk.ts_bounds)
            h.pipe_ts_out[(kk, t)] = program.add_var(key("tso", kk, t), *sbox)
            h.pipe_ts_avg[(kk, t)] = program.add_var(key("tsa", kk, t), *sbox)
            h.pipe_tr_in[(kk, t)] = program.add_var(key("tri", kk, t), *nl.tr_bounds)
            h.pipe_tr_out[(kk, t)] = program.add_var(key("tro", kk, t), *rbox)
            h.pipe_tr_avg[(kk, t)] = program.add_var(key("tra", kk, t), *rbox)

        # heat production couplings
        for d in case.devices:
            if isinstance(d, (Chp, HeatPump)):
                ratio = d.heat_ratio if isinstance(d, Chp) else d.cop
                hv = program.add_var(key("Hdev", d.id, t), 0.0)
                h.heat[(d.id, t)] = hv
                program.add_constraint(LinExpr.of((hv, 1.0), (var(key("Pdev", d.id, t)), -ratio)), EQ, 0.0,
                                       "dhs:heat-gen")

        # source transfer: sum H = c_w m_in (T_in - T_R)
        for k in sorted(sources):
            zs = program.add_var(key("hsrc", k, t), 0.0)
            e = LinExpr({zs: 1.0})
            for d in case.devices:
                if isinstance(d, (Chp, HeatPump)) and d.dhs_node == k:
                    e.add_term(h.heat[(d.id, t)], -1.0)
            program.add_constraint(e, EQ, 0.0, "dhs:heat-source")
            dv = diff(key("dsrc", k, t), h.ts_in[(k, t)], h.tr[(k, t)])
            registry.register(program, zs, var(key("min", k, t)), dv, cw, "heat-transfer", f"src:{k},{t}")

        # load transfer: H_D = c_w m_out (T_S - T_R,out)
        for n in case.exchangers:
            k = n.id
            hd = n.heat_demand[t]
            zl = program.add_var(key("hd", k, t), hd, hd)
            dv = diff(key("dload", k, t), h.ts[(k, t)], h.tr_out[(k, t)])
            if n.max_drop < program.ub[dv]:
                program.set_bounds(dv, program.lb[dv], n.max_drop)
            registry.register(program, zl, var(key("mout", k, t)), dv, cw, "heat-transfer", f"load:{k},{t}")

        # mixing
        for n in case.nodes:
            k = n.id
            for side, node_t in (("S", h.ts[(k, t)]), ("R", h.tr[(k, t)])):
                streams = mixing_streams(case, k, side)
                if not streams:
                    continue
                if len(streams) == 1:
                    _, _, tname = streams[0]
                    program.add_constraint(LinExpr.of((node_t, 1.0), (var(tname.format(t=t)), -1.0)),
                                           EQ, 0.0, "dhs:mix-single")
                    continue
                total = LinExpr()
                for label, mname, tname in streams:
                    tag = f"{side.lower()}:{k}:{label}"
                    dv = diff(f"dmix[{tag},{t}]", node_t, var(tname.format(t=t)))
                    m = var(mname.format(t=t))
                    corners = [program.lb[m] * program.lb[dv], program.lb[m] * program.ub[dv],
                               program.ub[m] * program.lb[dv], program.ub[m] * program.ub[dv]]
                    zm = program.add_var(f"zmix[{tag},{t}]", min(corners), max(corners))
                    registry.register(program, zm, m, dv, 1.0, "mixing", f"mix:{tag},{t}")
                    total.add_term(zm, 1.0)
                program.add_constraint(total, EQ, 0.0, "dhs:mix")

        # pipes: inlet identities, averages, STD balances
        for p in case.pipes:
            kk = p.key
            a, b = std_coefficients(p, case)
            m = var(key("m", kk, t))
            tgd = case.ground_temp[t]
            program.add_constraint(LinExpr.of((h.pipe_ts_in[(kk, t)], 1.0), (h.ts[(p.from_node, t)], -1.0)),
                                   EQ, 0.0, "dhs:inlet")
            program.add_constraint(LinExpr.of((h.pipe_tr_in[(kk, t)], 1.0), (h.tr[(p.to_node, t)], -1.0)),
                                   EQ, 0.0, "dhs:inlet")
            for side, tin, tout, tavg, init in (
                    ("s", h.pipe_ts_in, h.pipe_ts_out, h.pipe_ts_avg, p.ts_init),
                    ("r", h.pipe_tr_in, h.pipe_tr_out, h.pipe_tr_avg, p.tr_init)):
                program.add_constraint(
                    LinExpr.of((tavg[(kk, t)], 1.0), (tin[(kk, t)], -0.5), (tout[(kk, t)], -0.5)),
                    EQ, 0.0, "dhs:avg")
                dv = diff(key(f"dstd{side}", kk, t), tout[(kk, t)], tin[(kk, t)])
                z = program.add_var(key(f"zstd{side}", kk, t))
                registry.register(program, z, m, dv, 1.0, "std", f"std{side}:{kk},{t}")
                prev = LinExpr({tavg[(kk, t - 1)]: 1.0}) if t else LinExpr(const=init)
                # (Tavg_t - Tavg_{t-1}) + (dt/M) z + k dt (Tavg_t - T_GD) = 0
                e = LinExpr({tavg[(kk, t)]: 1.0 + b, z: a}, -b * tgd) - prev
                program.add_constraint(e, EQ, 0.0, f"dhs:std-{side}")
    return h


def thermal_residuals(case: Case, solution: Solution | dict) -> ResidualReport:
    """Residuals of the original thermal equalities.

    Heat balances in MW (scale: max(|H|, 1 MW)), mixing energy balances in
    kg/s*K relative to sum(m_s T_s), STD balances in K.
    """
    val = solution.values() if isinstance(solution, Solution) else solution
    c = case.constants
    cw = c.specific_heat * MW
    rep = ResidualReport()
    g = lambda name: val.get(name, 0.0)  # noqa: E731
    sources = set(case.source_nodes)
    for t in range(case.T):
        for d in case.devices:
            if isinstance(d, (Chp, HeatPump)):
                ratio = d.heat_ratio if isinstance(d, Chp) else d.cop
                hv = g(key("Hdev", d.id, t))
                rep.add("dhs:heat-gen", f"{d.id},{t}", hv - ratio * g(key("Pdev", d.id, t)), abs(hv))
        for k in sorted(sources):
            H = sum(g(key("Hdev", d.id, t)) for d in case.devices
                    if isinstance(d, (Chp, HeatPump)) and d.dhs_node == k)
            exact = cw * g(key("min", k, t)) * (g(key("tsin", k, t)) - g(key("tr", k, t)))
            rep.add("dhs:heat-source", f"{k},{t}", H - exact, abs(H))
        for n in case.exchangers:
            k = n.id
            exact = cw * g(key("mout", k, t)) * (g(key("ts", k, t)) - g(key("trout", k, t)))
            rep.add("dhs:heat-load", f"{k},{t}", n.heat_demand[t] - exact, n.heat_demand[t])
            drop = g(key("ts", k, t)) - g(key("trout", k, t))
            rep.add("dhs:hx-drop", f"{k},{t}", max(0.0, drop - n.max_drop), 1.0)
        for n in case.nodes:
            k = n.id
            for side, tnode in (("S", g(key("ts", k, t))), ("R", g(key("tr", k, t)))):
                streams = mixing_streams(case, k, side)
                if not streams:
                    continue
                flows = [g(mn.format(t=t)) for _, mn, _ in streams]
                temps = [g(tn.format(t=t)) for _, _, tn in streams]
                energy = sum(m * T for m, T in zip(flows, temps))
                res = tnode * sum(flows) - energy
                if len(streams) == 1 and flows[0] <= 0:
                    res = tnode - temps[0]
                rep.add(f"dhs:mix-{side}", f"{k},{t}", res, abs(energy))
        for p in case.pipes:
            kk = p.key
            a, b = std_coefficients(p, case)
            m = g(key("m", kk, t))
            tgd = case.ground_temp[t]
            rep.add("dhs:inlet", f"s:{kk},{t}", g(key("tsi", kk, t)) - g(key("ts", p.from_node, t)))
            rep.add("dhs:inlet", f"r:{kk},{t}", g(key("tri", kk, t)) - g(key("tr", p.to_node, t)))
            for side, init in (("s", p.ts_init), ("r", p.tr_init)):
                tin = g(key(f"t{side}i", kk, t))
                tout = g(key(f"t{side}o", kk, t))
                tavg = g(key(f"t{side}a", kk, t))
                rep.add("dhs:avg", f"{side}:{kk},{t}", tavg - 0.5 * (tin + tout))
                prev = g(key(f"t{side}a", kk, t - 1)) if t else init
                std = (tavg - prev) + a * m * (tout - tin) + b * (tavg - tgd)
                rep.add(f"dhs:std-{side}", f"{kk},{t}", std, 1.0)
    return rep


def mccormick_gaps(registry: BilinearRegistry, solution: Solution | dict) -> ResidualReport:
    """``z - c x y`` for every registered term (informational)."""
    x = solution.x if isinstance(solution, Solution) else solution
    rep = ResidualReport()
    for t in registry.terms:
        rep.add(f"gap:{t.family}", t.label, t.residual(x), abs(x[t.z]), checked=False)
    return rep
