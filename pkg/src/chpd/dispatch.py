"""Dispatch drivers: convex relaxation, adaptive refinement, flow-fixed recovery
and the constant-flow benchmark."""
from __future__ import annotations

import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .case import Case
from .conic import ERROR, FEASIBLE, INFEASIBLE, LE, OPTIMAL, TIME_LIMIT, LinExpr, Solution, key
from .hydraulics import flow_names, hydraulic_residuals
from .model import Model, build_relaxed
from .power import operating_cost, power_residuals
from .relaxation import PartitionState, warm_binaries
from .residuals import ResidualReport
from .solvers import ConicBackend, solve_continuous, solve_misocp
from .thermal import thermal_residuals

log = logging.getLogger(__name__)

RECOVERY_TOL = 1e-6
GAP_STOP = 1e-6

# result statuses beyond the solver ones
RELAXED_ONLY = "relaxed-only"


@dataclass
class IterationRecord:
    iteration: int
    refined: int | None          # term id refined after this iteration
    refined_label: str | None
    relaxed: float | None        # relaxed objective of this iteration
    bound: float | None          # certified lower bound of this iteration
    max_gap: float | None
    recovered: float | None      # recovered feasible cost (None if recovery failed)
    best: float | None           # best feasible cost so far
    binaries: int
    nodes: int
    wall_time: float
    status: str


@dataclass
class DispatchResult:
    status: str
    method: str
    objective: float | None = None          # best feasible (recovered) cost
    bound: float | None = None              # best certified lower bound
    relaxed_objective: float | None = None
    relaxed: Solution | None = None
    solution: Solution | None = None        # feasible point
    residuals: ResidualReport | None = None
    trace: list[IterationRecord] = field(default_factory=list)
    partitions: dict[int, int] = field(default_factory=dict)
    flows: dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.solution is not None and self.objective is not None

    def summary(self) -> dict:
        return {
            "status": self.status, "method": self.method, "objective": self.objective,
            "bound": self.bound, "relaxed_objective": self.relaxed_objective,
            "max_residual": None if self.residuals is None else self.residuals.max_rel(),
            "iterations": len(self.trace), "wall_time": self.wall_time, "message": self.message,
            "refined_terms": sum(1 for n in self.partitions.values() if n > 1),
        }


def all_residuals(case: Case, values: dict[str, float]) -> ResidualReport:
    rep = power_residuals(case, values)
    rep.extend(hydraulic_residuals(case, values))
    rep.extend(thermal_residuals(case, values))
    return rep


# -- flows ---------------------------------------------------------------------


def _continuity_matrix(case: Case, names: list[str]) -> np.ndarray:
    col = {n: i for i, n in enumerate(names)}
    sources = set(case.source_nodes)
    rows = []
    for t in range(case.T):
        for n in case.nodes:
            k = n.id
            r = np.zeros(len(names))
            if k in sources:
                r[col[key("min", k, t)]] += 1.0
            if n.is_exchanger:
                r[col[key("mout", k, t)]] -= 1.0
            for p in case.pipes_out_of(k):
                r[col[key("m", p.key, t)]] -= 1.0
            for p in case.pipes_into(k):
                r[col[key("m", p.key, t)]] += 1.0
            rows.append(r)
    return np.array(rows)


def project_flows(case: Case, model: Model, values: dict[str, float]) -> dict[str, float]:
    """Flow values of ``values`` projected onto continuity (least squares),
    then clipped to the variable bounds."""
    names = flow_names(case)
    f = np.array([values[n] for n in names])
    A = _continuity_matrix(case, names)
    r = A @ f
    if np.abs(r).max(initial=0.0) > 0:
        f = f - A.T @ np.linalg.lstsq(A @ A.T, r, rcond=None)[0]
    prog = model.program
    lo = np.array([prog.lb[prog.var(n)] for n in names])
    hi = np.array([prog.ub[prog.var(n)] for n in names])
    f = np.clip(f, lo, hi)
    return dict(zip(names, map(float, f)))


def uniform_flows(case: Case, total: float | dict[str, float]) -> dict[str, float]:
    """Time-constant flows for the benchmark.

    A scalar is the source injection; each exchanger takes a share equal to its
    share of the summed peak demand and pipe flows follow by continuity.  A map
    gives pipe flows by pipe key; exchanger outflows follow by continuity.  A
    map keyed by flow variable names (``m[1-2,0]``, ...) is used as is, which
    replays the flows of an earlier solution.
    """
    if isinstance(total, dict) and set(flow_names(case)) <= set(total):
        return {n: float(total[n]) for n in flow_names(case)}
    if isinstance(total, dict):
        pipe = {p.key: float(total[p.key]) for p in case.pipes}
        out = {}
        for n in case.exchangers:
            k = n.id
            out[k] = (sum(pipe[p.key] for p in case.pipes_into(k))
                      - sum(pipe[p.key] for p in case.pipes_out_of(k)))
        inj = {k: sum(pipe[p.key] for p in case.pipes_out_of(k)) for k in case.source_nodes}
        for n in case.nodes:
            k = n.id
            if k in out or k in inj:
                continue
            net = (sum(pipe[p.key] for p in case.pipes_into(k))
                   - sum(pipe[p.key] for p in case.pipes_out_of(k)))
            if abs(net) > 1e-9 * max(1.0, max(pipe.values())):
                raise ValueError(f"pipe flows do not balance at junction {k} (net {net:g} kg/s)")
        bad = [k for k, v in out.items() if v < 0]
        if bad:
            raise ValueError(f"pipe flows imply negative exchanger outflow at nodes {bad}")
    else:
        peaks = {n.id: max(n.heat_demand) for n in case.exchangers}
        tot = sum(peaks.values())
        out = {k: float(total) * v / tot for k, v in peaks.items()}
        children = defaultdict(list)
        for p in case.pipes:
            children[p.from_node].append(p)

        def sub(k: int) -> float:
            return out.get(k, 0.0) + sum(sub(p.to_node) for p in children[k])

        pipe = {p.key: sub(p.to_node) for p in case.pipes}
        inj = {k: sub(k) for k in case.source_nodes}
    flows = {}
    for t in range(case.T):
        flows.update({key("m", kk, t): v for kk, v in pipe.items()})
        flows.update({key("mout", k, t): v for k, v in out.items()})
        flows.update({key("min", k, t): v for k, v in inj.items()})
    return flows


# -- recovery ------------------------------------------------------------------


def solve_fixed_flows(case: Case, flows: dict[str, float], method: str,
                      backend: ConicBackend | None = None, tol: float = RECOVERY_TOL,
                      time_limit: float | None = None) -> DispatchResult:
    """Fix every flow and solve the remaining (convex) program."""
    t0 = time.perf_counter()
    try:
        model = build_relaxed(case, fixed_flows=flows)
    except ValueError as exc:
        return DispatchResult(INFEASIBLE, method, flows=flows, message=str(exc),
                              wall_time=time.perf_counter() - t0)
    left = model.registry.remaining(model.program)
    if left:
        raise RuntimeError(f"{len(left)} bilinear terms remain after fixing flows")
    sol = solve_continuous(model.program, backend, time_limit)
    res = DispatchResult(sol.status, method, flows=flows)
    res.wall_time = time.perf_counter() - t0
    if sol.status != OPTIMAL:
        res.message = f"fixed-flow subproblem {sol.status}: {sol.stats.message}"
        return res
    vals = sol.values()
    rep = all_residuals(case, vals)
    if rep.max_rel(["eps:flow"]) > tol:
        sol, vals, rep = _tighten_cones(case, model, sol, backend, time_limit) or (sol, vals, rep)
    res.residuals = rep
    worst = rep.worst()
    if worst is not None and worst.rel > tol:
        res.status = ERROR
        res.message = f"residual {worst.family} {worst.label} = {worst.value:.3e} exceeds {tol:g}"
        return res
    res.solution = sol
    res.objective = operating_cost(case, vals)
    return res


def _tighten_cones(case: Case, model: Model, sol: Solution, backend: ConicBackend | None,
                   time_limit: float | None):
    """Among cost-optimal points pick the one with least squared current.

    With zero or flat costs the branch cones need not be tight at the
    optimum; minimizing sum(l) at (numerically) unchanged cost restores
    l v = P^2 + Q^2 wherever the cost allows it.
    """
    prog = model.program.copy()
    cost = prog.objective.copy()
    slack = 1e-9 * max(1.0, abs(sol.objective))
    prog.add_constraint(cost, LE, sol.objective + slack, "tiebreak:cost")
    prog.set_objective(LinExpr({i: 1.0 for i in model.power.l.values()}))
    second = solve_continuous(prog, backend, time_limit)
    if second.status != OPTIMAL:
        return None
    second = Solution(OPTIMAL, cost.value(second.x), sol.bound, second.x, second.index, second.stats)
    vals = second.values()
    return second, vals, all_residuals(case, vals)


def recover_feasible(case: Case, relaxed: Solution, backend: ConicBackend | None = None,
                     tol: float = RECOVERY_TOL, time_limit: float | None = None,
                     model: Model | None = None) -> DispatchResult:
    """Fix the relaxed flows and re-solve; verify the original equalities."""
    if relaxed.x is None:
        raise ValueError("relaxed solution has no values")
    vals = relaxed.values()
    missing = [n for n in flow_names(case) if n not in vals]
    if missing:
        raise ValueError(f"relaxed solution lacks flow handles, e.g. {missing[0]}")
    if model is None:
        model = build_relaxed(case)
    flows = project_flows(case, model, vals)
    res = solve_fixed_flows(case, flows, "recovery", backend, tol, time_limit)
    res.relaxed = relaxed
    res.relaxed_objective = relaxed.objective
    res.bound = relaxed.bound
    return res


# -- drivers -------------------------------------------------------------------


def solve_dispatch_convex(case: Case, backend: ConicBackend | None = None,
                          time_limit: float | None = None) -> DispatchResult:
    """n = 1 relaxation (McCormick + cones) followed by recovery."""
    t0 = time.perf_counter()
    model = build_relaxed(case)
    sol = solve_continuous(model.program, backend, time_limit)
    if sol.status != OPTIMAL:
        return DispatchResult(sol.status, "convex", relaxed=sol, message=sol.stats.message,
                              wall_time=time.perf_counter() - t0)
    rec = recover_feasible(case, sol, backend, model=model)
    rec.method = "convex"
    rec.partitions = {t.id: 1 for t in model.registry.terms}
    if not rec.feasible:
        rec.status = RELAXED_ONLY
    rec.wall_time = time.perf_counter() - t0
    return rec


def solve_dispatch_misocp(case: Case, n: int, gap: float = 1e-4, time_limit: float | None = None,
                          backend: ConicBackend | None = None) -> DispatchResult:
    """Uniform n-partition relaxation solved by branch and bound, then recovery."""
    t0 = time.perf_counter()
    base = build_relaxed(case)
    parts = PartitionState.uniform(base.registry, n)
    model = build_relaxed(case, parts)
    # warm start: cells containing the n = 1 recovered point, which is
    # feasible for every piecewise relaxation
    warm = None
    first = solve_dispatch_convex(case, backend, time_limit)
    start = first.solution if first.feasible else first.relaxed
    if start is not None and start.x is not None:
        warm = _warm_start(model, parts, start)
    left = None if time_limit is None else max(time_limit - (time.perf_counter() - t0), 1e-3)
    sol = solve_misocp(model.program, warm, gap=gap, time_limit=left, backend=backend)
    if sol.x is None:
        return DispatchResult(sol.status, f"misocp n={n}", relaxed=sol, bound=sol.bound,
                              message=sol.stats.message, wall_time=time.perf_counter() - t0)
    rec = recover_feasible(case, sol, backend, model=model)
    rec.method = f"misocp n={n}"
    rec.partitions = dict(parts.n)
    if not rec.feasible:
        rec.status = RELAXED_ONLY
    rec.wall_time = time.perf_counter() - t0
    return rec


def solve_constant_flow(case: Case, fixed_flow: float | dict[str, float],
                        backend: ConicBackend | None = None) -> DispatchResult:
    flows = uniform_flows(case, fixed_flow)
    res = solve_fixed_flows(case, flows, "constant-flow", backend)
    if res.status == OPTIMAL and not res.feasible:
        res.status = ERROR
    return res


def _warm_start(model: Model, parts: PartitionState, start: Solution) -> dict[str, float]:
    """Binary assignment placing ``start`` in its cell of every refined term."""
    x = start.x
    warm: dict[str, float] = {}
    for t in model.registry.terms:
        n = parts.get(t.id)
        if n > 1:
            warm.update(warm_binaries(t, n, x[t.x], x[t.y]))
    return warm


def _term_gaps(model: Model, sol: Solution) -> list[float]:
    x = sol.x
    return [t.gap(x) for t in model.registry.terms]


def adaptive_solve(case: Case, time_limit: float, gap: float = 1e-4,
                   max_iterations: int | None = None, cap: int | None = None,
                   backend: ConicBackend | None = None) -> DispatchResult:
    """Adaptive partition refinement.

    Each iteration solves the current piecewise relaxation, refines the term
    with the largest violation rate, and recovers a feasible point from the
    relaxed flows.  The best recovered point and the tightest bound are kept.
    """
    if not time_limit > 0:
        raise ValueError("time_limit must be positive")
    t0 = time.perf_counter()
    deadline = t0 + time_limit
    parts = PartitionState() if cap is None else PartitionState(cap=cap)
    best: DispatchResult | None = None
    bound = -math.inf
    last_relaxed: Solution | None = None
    trace: list[IterationRecord] = []
    it = 0
    while True:
        left = deadline - time.perf_counter()
        if left <= 0 or (max_iterations is not None and it >= max_iterations):
            break
        it += 1
        ti = time.perf_counter()
        model = build_relaxed(case, parts)
        warm = None
        start = best.solution if best is not None else last_relaxed
        if start is not None and model.program.binaries:
            warm = _warm_start(model, parts, start)
        if model.program.binaries:
            sol = solve_misocp(model.program, warm, gap=gap, time_limit=left, backend=backend)
        else:
            sol = solve_continuous(model.program, backend, left)
        if sol.x is None or sol.status not in (OPTIMAL, FEASIBLE, TIME_LIMIT):
            log.warning("iteration %d: relaxation %s (%s)", it, sol.status, sol.stats.message)
            trace.append(IterationRecord(it, None, None, None, sol.bound, None, None,
                                         None if best is None else best.objective,
                                         len(model.program.binaries), sol.stats.nodes,
                                         time.perf_counter() - ti, sol.status))
            if sol.status == TIME_LIMIT:
                break
            continue
        # only an optimally solved relaxation certifies a bound
        it_bound = sol.bound if sol.status == OPTIMAL else None
        if it_bound is not None:
            bound = max(bound, it_bound)
        rec = recover_feasible(case, sol, backend, model=model)
        if rec.feasible and (best is None or rec.objective < best.objective - 1e-9):
            best = rec
            best.partitions = dict(parts.n)
        gaps = _term_gaps(model, sol)
        gmax = max(gaps, default=0.0)
        refined = label = None
        if gmax >= GAP_STOP:
            order = sorted(range(len(gaps)), key=lambda i: (-gaps[i], i))
            for i in order:
                if parts.get(i) < parts.cap:
                    refined, label = i, model.registry.terms[i].label
                    break
        trace.append(IterationRecord(it, refined, label, sol.objective, it_bound, gmax,
                                     rec.objective if rec.feasible else None,
                                     None if best is None else best.objective,
                                     len(model.program.binaries), sol.stats.nodes,
                                     time.perf_counter() - ti, sol.status))
        last_relaxed = sol
        if refined is None or sol.status != OPTIMAL:
            break
        parts.refine(refined, gmax)

    wall = time.perf_counter() - t0
    if best is None:
        return DispatchResult(RELAXED_ONLY if last_relaxed is not None else ERROR, "adaptive",
                              bound=bound if math.isfinite(bound) else None,
                              relaxed=last_relaxed,
                              relaxed_objective=None if last_relaxed is None else last_relaxed.objective,
                              trace=trace, partitions=dict(parts.n), wall_time=wall,
                              message="no feasible recovery")
    out = DispatchResult(OPTIMAL if best.objective - bound <= gap * max(1.0, abs(best.objective))
                         else FEASIBLE, "adaptive", best.objective,
                         bound if math.isfinite(bound) else None,
                         None if last_relaxed is None else last_relaxed.objective,
                         last_relaxed, best.solution, best.residuals, trace, dict(parts.n),
                         best.flows, wall)
    return out
