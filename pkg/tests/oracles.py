"""Independent reference computations shared by unit and acceptance tests."""
import itertools
import math

import cvxpy as cp
import numpy as np

from chpd.conic import EQ, LE, ConicProgram, LinExpr


def two_bus_flow(r: float, p: float, v1: float = 1.0) -> tuple[float, float]:
    """(l, v2) of one lossy line (x = 0, Q = 0) feeding load p, by bisection.

    l satisfies l v1 = (p + r l)^2; the smaller root is the physical one.
    """
    f = lambda l: (p + r * l) ** 2 - l * v1  # noqa: E731
    lo, hi = 0.0, (v1 - 2 * r * p) / (2 * r * r) if r > 0 else 1e6
    # f(0) = p^2 > 0 and f is decreasing up to its vertex
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    l = 0.5 * (lo + hi)
    P = p + r * l
    return l, v1 - 2 * r * P + r * r * l


def cvx_solve(program: ConicProgram, fixed: dict[int, float] | None = None) -> float | None:
    """Optimal value of ``program`` with binaries relaxed or fixed, via cvxpy."""
    n = program.num_vars
    x = cp.Variable(n)
    fixed = fixed or {}

    def aff(e: LinExpr):
        if not e.terms:
            return e.const
        idx = list(e.terms)
        return np.array([e.terms[i] for i in idx]) @ x[idx] + e.const

    cons = []
    lb, ub = np.array(program.lb), np.array(program.ub)
    for i in range(n):
        if i in fixed:
            cons.append(x[i] == fixed[i])
        else:
            if math.isfinite(lb[i]):
                cons.append(x[i] >= lb[i])
            if math.isfinite(ub[i]):
                cons.append(x[i] <= ub[i])
    for row in program.rows:
        lhs = aff(LinExpr(row.terms))
        if row.sense == EQ:
            cons.append(lhs == row.rhs)
        elif row.sense == LE:
            cons.append(lhs <= row.rhs)
        else:
            cons.append(lhs >= row.rhs)
    for cone in program.cones:
        head = aff(cone.entries[0])
        tail = cp.hstack([aff(e) for e in cone.entries[1:]])
        cons.append(cp.norm(tail, 2) <= head)
    prob = cp.Problem(cp.Minimize(aff(program.objective)), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status in ("optimal", "optimal_inaccurate"):
        return float(prob.value)
    return None


def brute_force(program: ConicProgram) -> float | None:
    """Minimum over every binary assignment; None if none is feasible."""
    bins = program.binaries
    best = None
    for combo in itertools.product((0.0, 1.0), repeat=len(bins)):
        v = cvx_solve(program, dict(zip(bins, combo)))
        if v is not None and (best is None or v < best):
            best = v
    return best


def random_misocp(rng: np.random.Generator, n_bin: int | None = None, n_cont: int = 3,
                  n_cones: int | None = None) -> ConicProgram:
    """Small bounded program with binaries, linear rows and cones."""
    n_bin = int(rng.integers(1, 9)) if n_bin is None else n_bin
    n_cones = int(rng.integers(0, 4)) if n_cones is None else n_cones
    p = ConicProgram("rand")
    xs = [p.add_var(f"x{i}", -5.0, 5.0) for i in range(n_cont)]
    bs = [p.add_var(f"b{i}", binary=True) for i in range(n_bin)]
    allv = xs + bs

    def rand_expr(scale=1.0, const=0.0):
        return LinExpr({i: float(scale * rng.normal()) for i in allv}, const)

    for _ in range(int(rng.integers(1, 4))):
        p.add_constraint(rand_expr(), LE, float(rng.uniform(0.5, 3.0)))
    # a cardinality row keeps some assignments infeasible
    p.add_constraint(LinExpr({b: 1.0 for b in bs}), ">=", float(rng.integers(0, n_bin + 1)) / 2)
    for _ in range(n_cones):
        tail = [rand_expr(0.5) for _ in range(2)]
        head = LinExpr({b: float(rng.uniform(0, 1)) for b in bs}, float(rng.uniform(1.0, 4.0)))
        p.add_cone([head] + tail)
    p.set_objective(rand_expr())
    return p


def z_interval(program: ConicProgram, z: int, point: dict[int, float]) -> tuple[float, float]:
    """Range of ``z`` allowed by the single-``z`` rows with every other variable at ``point``."""
    lo, hi = -math.inf, math.inf
    for row in program.rows:
        a = row.terms.get(z, 0.0)
        if a == 0.0:
            continue
        rest = row.rhs - sum(c * point[i] for i, c in row.terms.items() if i != z)
        b = rest / a
        sense = row.sense if a > 0 else {"<=": ">=", ">=": "<="}.get(row.sense, row.sense)
        if sense in ("==", ">="):
            lo = max(lo, b)
        if sense in ("==", "<="):
            hi = min(hi, b)
    return lo, hi


def piecewise_witness(program: ConicProgram, block, term, x: float, y: float) -> np.ndarray:
    """Feasible assignment of a piecewise block for the exact point (x, y, c x y).

    Bilinear interpolation over the active cell reproduces x y exactly.
    """
    n = block.n
    (xl, xu), (yl, yu) = term.x_bounds, term.y_bounds
    v = np.zeros(program.num_vars)
    v[term.x], v[term.y], v[term.z] = x, y, term.c * x * y

    def cell(val, lo, hi):
        if hi <= lo:
            return 0, 0.0
        s = (val - lo) / (hi - lo) * n
        i = min(max(int(math.floor(s)), 0), n - 1)
        return i, s - i

    i, r = cell(x, xl, xu)
    j, s = cell(y, yl, yu)
    for di, wi in ((0, 1 - r), (1, r)):
        for dj, wj in ((0, 1 - s), (1, s)):
            v[block.phi[i + di][j + dj]] += wi * wj
    v[block.alpha[i]] = 1.0
    v[block.beta[j]] = 1.0
    return v
