"""Conic backends and a best-bound branch-and-bound layer on top of them."""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp

from .conic import (
    EQ, ERROR, FEASIBLE, INFEASIBLE, LE, OPTIMAL, TIME_LIMIT, UNBOUNDED,
    ConicProgram, Solution, SolveStats,
)


@dataclass(frozen=True)
class SolverSettings:
    tol_feas: float = 1e-8
    tol_gap_abs: float = 1e-8
    tol_gap_rel: float = 1e-8
    max_iter: int = 200
    verbose: bool = False


@dataclass
class BackendResult:
    status: str
    objective: float | None
    x: np.ndarray | None
    iterations: int = 0
    message: str = ""


class ConicBackend(Protocol):
    """Anything that can solve a compiled continuous conic program.

    ``solve`` receives the program with some variables pinned (``fixed``
    maps index -> value); it must honor the pins exactly.
    """

    def solve(self, compiled: "CompiledProgram", fixed: dict[int, float],
              time_limit: float | None) -> BackendResult: ...


class CompiledProgram:
    """Matrix form ``A x + s = b`` with ``s`` in zero / nonneg / SOC blocks.

    Rows are stored per block with the variable-bound rows kept apart, so a
    set of pinned variables can be substituted out cheaply for every node.
    """

    def __init__(self, program: ConicProgram):
        self.program = program
        n = program.num_vars
        self.n = n
        self.c = np.zeros(n)
        for i, v in program.objective.terms.items():
            self.c[i] += v
        self.c0 = program.objective.const
        eq_r, eq_c, eq_v, eq_b = [], [], [], []
        in_r, in_c, in_v, in_b = [], [], [], []
        ne = ni = 0
        for row in program.rows:
            if row.sense == EQ:
                for i, a in row.terms.items():
                    eq_r.append(ne); eq_c.append(i); eq_v.append(a)
                eq_b.append(row.rhs)
                ne += 1
            else:
                s = 1.0 if row.sense == LE else -1.0
                for i, a in row.terms.items():
                    in_r.append(ni); in_c.append(i); in_v.append(s * a)
                in_b.append(s * row.rhs)
                ni += 1
        self.A_eq = sp.csr_matrix((eq_v, (eq_r, eq_c)), shape=(ne, n))
        self.b_eq = np.asarray(eq_b, dtype=float)
        self.A_in = sp.csr_matrix((in_v, (in_r, in_c)), shape=(ni, n))
        self.b_in = np.asarray(in_b, dtype=float)
        so_r, so_c, so_v, so_b, dims = [], [], [], [], []
        k = 0
        for cone in program.cones:
            for e in cone.entries:
                for i, a in e.terms.items():
                    so_r.append(k); so_c.append(i); so_v.append(-a)
                so_b.append(e.const)
                k += 1
            dims.append(cone.dim)
        self.A_so = sp.csr_matrix((so_v, (so_r, so_c)), shape=(k, n))
        self.b_so = np.asarray(so_b, dtype=float)
        self.soc_dims = dims
        self.lb = np.asarray(program.lb, dtype=float)
        self.ub = np.asarray(program.ub, dtype=float)
        self.binary = np.asarray(program.binary, dtype=bool)

    def pinned(self, fixed: dict[int, float]) -> dict[int, float]:
        """Explicit pins plus every variable whose bounds coincide."""
        out = {int(i): float(self.lb[i]) for i in np.flatnonzero(self.lb == self.ub)}
        out.update(fixed)
        return out


_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
    "MaxTime": TIME_LIMIT,
}


class ClarabelBackend:
    """Interior-point SOCP backend (Clarabel)."""

    def __init__(self, settings: SolverSettings | None = None):
        self.settings = settings or SolverSettings()

    def solve(self, compiled: CompiledProgram, fixed: dict[int, float],
              time_limit: float | None = None) -> BackendResult:
        import clarabel

        cp = compiled
        pins = cp.pinned(fixed)
        for i, v in pins.items():
            if v < cp.lb[i] - 1e-9 or v > cp.ub[i] + 1e-9:
                return BackendResult(INFEASIBLE, None, None, message=f"pin outside bounds for var {i}")
        mask = np.ones(cp.n, dtype=bool)
        xfix = np.zeros(cp.n)
        if pins:
            idx = np.fromiter(pins.keys(), dtype=int)
            mask[idx] = False
            xfix[idx] = np.fromiter(pins.values(), dtype=float)
        free = np.flatnonzero(mask)
        nf = free.size
        obj_fixed = float(cp.c @ xfix) + cp.c0

        blocks_A, blocks_b, cones = [], [], []
        tol = 1e-9

        # equality rows
        A = cp.A_eq[:, free]
        b = cp.b_eq - cp.A_eq @ xfix
        live = np.diff(A.indptr) > 0
        dead_b = b[~live]
        if dead_b.size and np.max(np.abs(dead_b)) > tol * max(1.0, np.max(np.abs(cp.b_eq), initial=1.0)):
            return BackendResult(INFEASIBLE, None, None, message="inconsistent equality after pinning")
        if live.any():
            blocks_A.append(A[live]); blocks_b.append(b[live])
            cones.append(clarabel.ZeroConeT(int(live.sum())))

        # inequality rows and bounds on free variables
        A = cp.A_in[:, free]
        b = cp.b_in - cp.A_in @ xfix
        live = np.diff(A.indptr) > 0
        dead_b = b[~live]
        if dead_b.size and np.min(dead_b) < -tol * max(1.0, np.max(np.abs(cp.b_in), initial=1.0)):
            return BackendResult(INFEASIBLE, None, None, message="inconsistent inequality after pinning")
        lbf, ubf = cp.lb[free], cp.ub[free]
        has_ub = np.flatnonzero(np.isfinite(ubf))
        has_lb = np.flatnonzero(np.isfinite(lbf))
        A_ub = sp.csr_matrix((np.ones(has_ub.size), (np.arange(has_ub.size), has_ub)), shape=(has_ub.size, nf))
        A_lb = sp.csr_matrix((-np.ones(has_lb.size), (np.arange(has_lb.size), has_lb)), shape=(has_lb.size, nf))
        nn_A = sp.vstack([A[live], A_ub, A_lb], format="csr")
        nn_b = np.concatenate([b[live], ubf[has_ub], -lbf[has_lb]])
        if nn_A.shape[0]:
            blocks_A.append(nn_A); blocks_b.append(nn_b)
            cones.append(clarabel.NonnegativeConeT(nn_A.shape[0]))

        # second-order cones
        if cp.soc_dims:
            A = cp.A_so[:, free]
            b = cp.b_so - cp.A_so @ xfix
            start = 0
            keep_rows = []
            for d in cp.soc_dims:
                rows = slice(start, start + d)
                start += d
                if A[rows].nnz == 0:
                    v = b[rows]
                    if np.linalg.norm(v[1:]) > v[0] + 1e-9 * max(1.0, abs(v[0])):
                        return BackendResult(INFEASIBLE, None, None, message="constant cone violated")
                    continue
                keep_rows.append(np.arange(rows.start, rows.stop))
                cones.append(clarabel.SecondOrderConeT(d))
            if keep_rows:
                r = np.concatenate(keep_rows)
                blocks_A.append(A[r]); blocks_b.append(b[r])

        if nf == 0:
            x = xfix.copy()
            return BackendResult(OPTIMAL, obj_fixed, x, 0, "all variables pinned")

        Am = sp.vstack(blocks_A, format="csc") if blocks_A else sp.csc_matrix((0, nf))
        bm = np.concatenate(blocks_b) if blocks_b else np.zeros(0)
        P = sp.csc_matrix((nf, nf))
        q = cp.c[free]

        st = self.settings
        settings = clarabel.DefaultSettings()
        settings.verbose = st.verbose
        settings.tol_feas = st.tol_feas
        settings.tol_gap_abs = st.tol_gap_abs
        settings.tol_gap_rel = st.tol_gap_rel
        settings.max_iter = st.max_iter
        if time_limit is not None:
            settings.time_limit = max(float(time_limit), 1e-3)
        try:
            solver = clarabel.DefaultSolver(P, q, Am, bm, cones, settings)
            res = solver.solve()
        except Exception as exc:  # backend panics surface as generic exceptions
            return BackendResult(ERROR, None, None, message=f"clarabel: {exc}")
        name = str(res.status).split(".")[-1]
        status = _STATUS.get(name, ERROR)
        x = None
        obj = None
        if status in (OPTIMAL, TIME_LIMIT, ERROR) and res.x is not None and len(res.x) == nf:
            x = xfix.copy()
            x[free] = np.asarray(res.x)
            x = np.clip(x, cp.lb, cp.ub)
            obj = float(cp.c @ x) + cp.c0
        return BackendResult(status, obj, x, int(res.iterations), name)


# -- public solve entry points ------------------------------------------------


def default_backend() -> ConicBackend:
    return ClarabelBackend()


def solve_continuous(program: ConicProgram, backend: ConicBackend | None = None,
                     time_limit: float | None = None, relax_binaries: bool = True) -> Solution:
    if not relax_binaries and program.binaries:
        raise ValueError("program has binaries; use solve_misocp")
    backend = backend or default_backend()
    t0 = time.perf_counter()
    cp = CompiledProgram(program)
    res = backend.solve(cp, {}, time_limit)
    stats = SolveStats(iterations=res.iterations, nodes=1, wall_time=time.perf_counter() - t0,
                       message=res.message)
    return Solution(res.status, res.objective, res.objective if res.status == OPTIMAL else None,
                    res.x if res.status in (OPTIMAL, TIME_LIMIT) else None, program.index, stats)


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixed: dict[int, float] = field(compare=False)
    depth: int = field(compare=False, default=0)


def _gap_ok(inc: float, bound: float, gap: float) -> bool:
    return inc - bound <= gap * max(1.0, abs(inc))


def solve_misocp(program: ConicProgram, warm: Solution | dict | None = None, gap: float = 1e-4,
                 time_limit: float | None = None, backend: ConicBackend | None = None,
                 int_tol: float = 1e-6, max_nodes: int | None = None) -> Solution:
    """Best-bound branch-and-bound over the binaries of ``program``.

    Node selection dives depth-first until an incumbent exists and is
    best-bound afterwards.  Branching picks the most fractional binary (ties:
    lowest index).  A warm
    start (a Solution or a name -> value map) seeds the incumbent when its
    binary assignment is feasible and orders children toward it.
    """
    backend = backend or default_backend()
    t0 = time.perf_counter()
    deadline = None if time_limit is None else t0 + time_limit
    cp = CompiledProgram(program)
    bins = program.binaries
    stats = SolveStats()

    def remaining() -> float | None:
        return None if deadline is None else max(deadline - time.perf_counter(), 0.0)

    def run(fixed: dict[int, float]) -> BackendResult:
        stats.nodes += 1
        r = backend.solve(cp, fixed, remaining())
        stats.iterations += r.iterations
        return r

    warm_vals: dict[int, float] = {}
    if warm is not None:
        items = warm.values() if isinstance(warm, Solution) else warm
        for name, v in dict(items).items():
            i = program.index.get(name)
            if i is not None and program.binary[i]:
                warm_vals[i] = float(round(v))

    inc_obj = math.inf
    inc_x: np.ndarray | None = None

    def consider(x: np.ndarray, obj: float) -> None:
        nonlocal inc_obj, inc_x
        if obj < inc_obj - 1e-12:
            inc_obj, inc_x = obj, x
            stats.trace.append((stats.nodes, inc_obj, best_bound()))

    counter = itertools.count()
    heap: list[_Node] = [_Node(-math.inf, next(counter), {}, 0)]
    timed_out = False
    unreliable = False

    def best_bound() -> float:
        b = min((n.bound for n in heap), default=math.inf)
        return min(b, inc_obj)

    if bins and len(warm_vals) == len(bins):
        r = run(dict(warm_vals))
        if r.status == OPTIMAL and r.x is not None:
            consider(r.x, r.objective)

    while heap:
        if deadline is not None and time.perf_counter() >= deadline:
            timed_out = True
            break
        if max_nodes is not None and stats.nodes >= max_nodes:
            timed_out = True
            break
        if inc_x is None:
            # plunge depth-first until the first incumbent, then best-bound
            i = max(range(len(heap)), key=lambda j: (heap[j].depth, -heap[j].seq))
            node = heap[i]
            heap[i] = heap[-1]
            heap.pop()
            heapq.heapify(heap)
        else:
            node = heapq.heappop(heap)
        if inc_x is not None and _gap_ok(inc_obj, node.bound, gap):
            heapq.heappush(heap, node)
            break
        r = run(node.fixed)
        if r.status == TIME_LIMIT:
            heapq.heappush(heap, node)
            timed_out = True
            break
        if r.status in (INFEASIBLE,):
            continue
        if r.status == UNBOUNDED:
            return Solution(UNBOUNDED, None, None, None, program.index, stats)
        if r.status != OPTIMAL or r.x is None:
            # cannot certify this subtree; keep its parent bound in the final bound
            unreliable = True
            stats.message = f"node solve failed: {r.message}"
            continue
        obj = max(r.objective, node.bound)
        if inc_x is not None and _gap_ok(inc_obj, obj, gap):
            continue
        x = r.x
        frac = [(abs(x[i] - round(x[i])), i) for i in bins if i not in node.fixed]
        frac = [(f, i) for f, i in frac if f > int_tol]
        if not frac:
            fixed = {i: float(round(x[i])) for i in bins}
            if fixed == node.fixed or not bins:
                consider(x, r.objective)
            else:
                r2 = run(fixed)
                if r2.status == OPTIMAL and r2.x is not None:
                    consider(r2.x, r2.objective)
            continue
        fmax = max(f for f, _ in frac)
        j = min(i for f, i in frac if f >= fmax - 1e-12)
        prefer = warm_vals.get(j, float(round(x[j])))
        for v in (prefer, 1.0 - prefer):
            child = dict(node.fixed)
            child[j] = v
            heapq.heappush(heap, _Node(obj, next(counter), child, node.depth + 1))

    stats.wall_time = time.perf_counter() - t0
    bound = best_bound() if heap else inc_obj
    if inc_x is None:
        if timed_out:
            return Solution(TIME_LIMIT, None, None if not heap else best_bound(), None, program.index, stats)
        if unreliable:
            return Solution(ERROR, None, None, None, program.index, stats)
        return Solution(INFEASIBLE, None, None, None, program.index, stats)
    if not heap:
        bound = inc_obj
    status = OPTIMAL if _gap_ok(inc_obj, bound, gap) and not unreliable else (TIME_LIMIT if timed_out else FEASIBLE)
    return Solution(status, inc_obj, min(bound, inc_obj), inc_x, program.index, stats)
