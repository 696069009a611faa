"""Convexification of the nonconvex pieces of the dispatch model.

Builders *register* nonconvex relations here instead of emitting them:

* bilinear equalities ``z = c * x * y`` (``BilinearTerm``),
* quadratic pressure-loss equalities ``lhs = mu * m**2`` (``QuadraticRelation``),
* pump operating regions ``rise <= a - b * m**2`` (``PumpRegion``).

``relax_all`` then turns every entry into conic / polyhedral constraints:
rotated cones for the quadratics, plain McCormick (n = 1) or the piecewise
convex-combination formulation (n > 1) for bilinears.  When ``x`` is pinned
(lb == ub, as in flow-fixed recovery) a bilinear collapses to one exact
linear row and a quadratic to an exact linear equality.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .conic import EQ, GE, LE, ConicProgram, LinExpr

DEFAULT_CAP = 16
FAMILIES = ("pump-power", "heat-transfer", "mixing", "std")


class RelaxationError(ValueError):
    pass


@dataclass
class BilinearTerm:
    id: int
    z: int
    x: int
    y: int
    c: float
    x_bounds: tuple[float, float]
    y_bounds: tuple[float, float]
    family: str
    label: str
    n: int = 1

    def __post_init__(self):
        for lo, hi in (self.x_bounds, self.y_bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise RelaxationError(f"term {self.label}: bounds must be finite")
            if lo > hi:
                raise RelaxationError(f"term {self.label}: reversed bounds [{lo}, {hi}]")
        if self.n < 1:
            raise RelaxationError("partition count must be >= 1")

    def gap(self, values, eps: float = 1e-3) -> float:
        """Violation rate |z - c x y| / max(|z|, eps) at a point."""
        z, x, y = values[self.z], values[self.x], values[self.y]
        return abs(z - self.c * x * y) / max(abs(z), eps)

    def residual(self, values) -> float:
        return values[self.z] - self.c * values[self.x] * values[self.y]


@dataclass
class QuadraticRelation:
    """``lhs = mu * m**2`` (relaxed to ``lhs >= mu * m**2``)."""

    id: int
    lhs: LinExpr
    mu: float
    m: int
    family: str
    label: str


@dataclass
class PumpRegion:
    """``rise <= a - b * m**2``: the speed-free envelope of the pump curves."""

    id: int
    rise: int
    m: int
    a: float
    b: float
    label: str


@dataclass
class BilinearRegistry:
    terms: list[BilinearTerm] = field(default_factory=list)
    quadratics: list[QuadraticRelation] = field(default_factory=list)
    pumps: list[PumpRegion] = field(default_factory=list)

    def register(self, program: ConicProgram, z: int, x: int, y: int, c: float,
                 family: str, label: str) -> BilinearTerm:
        if family not in FAMILIES:
            raise RelaxationError(f"unknown family {family!r}")
        t = BilinearTerm(len(self.terms), z, x, y, float(c),
                         (program.lb[x], program.ub[x]), (program.lb[y], program.ub[y]),
                         family, label)
        self.terms.append(t)
        return t

    def register_quadratic(self, lhs: LinExpr, mu: float, m: int, family: str,
                           label: str) -> QuadraticRelation:
        if not mu > 0:
            raise RelaxationError(f"{label}: quadratic coefficient must be positive")
        q = QuadraticRelation(len(self.quadratics), lhs.copy(), float(mu), m, family, label)
        self.quadratics.append(q)
        return q

    def register_pump(self, rise: int, m: int, a: float, b: float, label: str) -> PumpRegion:
        if not (a > 0 and b > 0):
            raise RelaxationError(f"{label}: pump region coefficients must be positive")
        p = PumpRegion(len(self.pumps), rise, m, float(a), float(b), label)
        self.pumps.append(p)
        return p

    def by_label(self, label: str) -> BilinearTerm:
        for t in self.terms:
            if t.label == label:
                return t
        raise KeyError(label)

    def family_counts(self) -> dict[str, int]:
        return dict(Counter(t.family for t in self.terms))

    def remaining(self, program: ConicProgram) -> list[BilinearTerm]:
        """Terms that are still genuinely bilinear (neither factor pinned)."""
        return [t for t in self.terms
                if program.lb[t.x] != program.ub[t.x] and program.lb[t.y] != program.ub[t.y]]


@dataclass
class PartitionState:
    n: dict[int, int] = field(default_factory=dict)
    iteration: int = 0
    history: list[tuple[int, int, float]] = field(default_factory=list)
    cap: int = DEFAULT_CAP

    @classmethod
    def uniform(cls, registry: BilinearRegistry, n: int, cap: int = DEFAULT_CAP) -> "PartitionState":
        return cls({t.id: n for t in registry.terms}, cap=cap)

    def get(self, term_id: int) -> int:
        return self.n.get(term_id, 1)

    def refine(self, term_id: int, violation: float) -> int:
        """Add one partition to ``term_id``; returns the new count."""
        cur = self.get(term_id)
        if cur >= self.cap:
            raise RelaxationError(f"term {term_id} already at the partition cap {self.cap}")
        self.n[term_id] = cur + 1
        self.iteration += 1
        self.history.append((self.iteration, term_id, violation))
        return cur + 1

    def copy(self) -> "PartitionState":
        return PartitionState(dict(self.n), self.iteration, list(self.history), self.cap)


# -- primitive relaxations -----------------------------------------------------


def relax_quadratic_equality(program: ConicProgram, lhs: LinExpr, mu: float, m: int,
                             tag: str = "quad") -> int:
    """Emit ``lhs >= mu * m**2`` as a rotated cone; returns the cone id.

    ``mu m^2 <= lhs``  <=>  ``||(2 sqrt(mu) m, lhs - 1)|| <= lhs + 1``.
    """
    if not mu > 0:
        raise RelaxationError("quadratic coefficient must be positive")
    s = 2.0 * math.sqrt(mu)
    return program.add_cone([lhs + 1.0, program.x(m, s), lhs - 1.0], tag)


def pump_convex_region(program: ConicProgram, rise: int, m: int, a: float, b: float,
                       tag: str = "pump") -> int:
    """Emit ``rise <= a - b m^2`` as a rotated cone; returns the cone id."""
    slack = LinExpr({rise: -1.0}, a)
    return relax_quadratic_equality(program, slack, b, m, tag)


def pump_region_coefficients(gamma1: float, gamma2: float, head_to_pressure: float,
                             density: float, unit: float = 1.0) -> tuple[float, float]:
    """(a, b) of ``rise <= a - b m^2`` with pressures divided by ``unit``."""
    return head_to_pressure * gamma1 / unit, head_to_pressure * gamma2 / density**2 / unit


def mccormick_envelope(term: BilinearTerm, program: ConicProgram, tag: str = "mc") -> list[int]:
    if term.n != 1:
        raise RelaxationError("mccormick_envelope requires n = 1; use piecewise_envelope")
    (xl, xu), (yl, yu) = term.x_bounds, term.y_bounds
    if xl > xu or yl > yu:
        raise RelaxationError(f"term {term.label}: reversed bounds")
    c, z, x, y = term.c, term.z, term.x, term.y

    def plane(xb: float, yb: float) -> LinExpr:
        # c * (xb * y + x * yb - xb * yb)
        return LinExpr.of((y, c * xb), (x, c * yb), const=-c * xb * yb)

    under = (plane(xl, yl), plane(xu, yu))
    over = (plane(xl, yu), plane(xu, yl))
    if c < 0:
        under, over = over, under
    ids = []
    zx = program.x(z)
    for p in under:
        ids.append(program.add_constraint(zx - p, GE, 0.0, tag))
    for p in over:
        ids.append(program.add_constraint(zx - p, LE, 0.0, tag))
    return ids


def grid(lo: float, hi: float, n: int) -> list[float]:
    return [lo + i * (hi - lo) / n for i in range(n + 1)]


@dataclass
class PiecewiseBlock:
    term: int
    n: int
    phi: list[list[int]]
    alpha: list[int]
    beta: list[int]
    rows: list[int]


def piecewise_envelope(term: BilinearTerm, n: int, program: ConicProgram,
                       cap: int = DEFAULT_CAP, tag: str = "pw") -> PiecewiseBlock:
    """Convex-combination piecewise McCormick with 2n binaries.

    Weights ``phi[i][j]`` sit on the grid points; a weight row i may be
    positive only if an adjacent x-partition is active, and likewise for
    columns, so (x, y, z) lies in the hull of one active cell's corners.
    """
    if n < 1:
        raise RelaxationError("n must be >= 1")
    if n > cap:
        raise RelaxationError(f"n = {n} exceeds the partition cap {cap}")
    (xl, xu), (yl, yu) = term.x_bounds, term.y_bounds
    xs, ys = grid(xl, xu, n), grid(yl, yu, n)
    tid = f"t{term.id}"
    phi = [[program.add_var(f"phi[{tid},{i},{j}]", 0.0, 1.0) for j in range(n + 1)]
           for i in range(n + 1)]
    alpha = [program.add_var(f"alpha[{tid},{i}]", binary=True) for i in range(1, n + 1)]
    beta = [program.add_var(f"beta[{tid},{j}]", binary=True) for j in range(1, n + 1)]
    rows = []
    ex, ey, ez, esum = LinExpr(), LinExpr(), LinExpr(), LinExpr()
    for i in range(n + 1):
        for j in range(n + 1):
            f = phi[i][j]
            ex.add_term(f, xs[i])
            ey.add_term(f, ys[j])
            ez.add_term(f, term.c * xs[i] * ys[j])
            esum.add_term(f, 1.0)
    rows.append(program.add_constraint(esum, EQ, 1.0, tag))
    rows.append(program.add_constraint(program.x(term.x) - ex, EQ, 0.0, tag))
    rows.append(program.add_constraint(program.x(term.y) - ey, EQ, 0.0, tag))
    rows.append(program.add_constraint(program.x(term.z) - ez, EQ, 0.0, tag))
    rows.append(program.add_constraint(LinExpr({a: 1.0 for a in alpha}), EQ, 1.0, tag))
    rows.append(program.add_constraint(LinExpr({b: 1.0 for b in beta}), EQ, 1.0, tag))

    def adjacent(bins: list[int], i: int) -> LinExpr:
        # grid point i touches partitions i (left) and i+1 (right), 1-based
        e = LinExpr()
        if i >= 1:
            e.add_term(bins[i - 1], 1.0)
        if i + 1 <= n:
            e.add_term(bins[i], 1.0)
        return e

    for i in range(n + 1):
        rowsum = LinExpr({phi[i][j]: 1.0 for j in range(n + 1)})
        rows.append(program.add_constraint(rowsum - adjacent(alpha, i), LE, 0.0, tag))
    for j in range(n + 1):
        colsum = LinExpr({phi[i][j]: 1.0 for i in range(n + 1)})
        rows.append(program.add_constraint(colsum - adjacent(beta, j), LE, 0.0, tag))
    return PiecewiseBlock(term.id, n, phi, alpha, beta, rows)


def active_cell(term: BilinearTerm, n: int, x: float, y: float) -> tuple[int, int]:
    """1-based partition indices containing (x, y) (lowest index on ties)."""
    def locate(v: float, lo: float, hi: float) -> int:
        if hi <= lo:
            return 1
        k = int(math.ceil((v - lo) / (hi - lo) * n))
        return min(max(k, 1), n)
    return locate(x, *term.x_bounds), locate(y, *term.y_bounds)


def warm_binaries(term: BilinearTerm, n: int, x: float, y: float) -> dict[str, float]:
    """Binary assignment of a piecewise block placing (x, y) in its cell."""
    i, j = active_cell(term, n, x, y)
    tid = f"t{term.id}"
    out = {f"alpha[{tid},{k}]": float(k == i) for k in range(1, n + 1)}
    out.update({f"beta[{tid},{k}]": float(k == j) for k in range(1, n + 1)})
    return out


# -- orchestration -------------------------------------------------------------


@dataclass
class RelaxationReport:
    rows: int = 0
    cones: int = 0
    binaries: int = 0
    linearized: int = 0
    mccormick: int = 0
    piecewise: int = 0
    quadratic_cones: int = 0
    quadratic_fixed: int = 0
    pump_cones: int = 0
    terms_by_family: dict[str, int] = field(default_factory=dict)
    partitions: dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "partitions"}


def _pinned(program: ConicProgram, i: int) -> bool:
    return program.lb[i] == program.ub[i]


def relax_all(case, program: ConicProgram, registry: BilinearRegistry,
              partitions: PartitionState | None = None, cap: int | None = None) -> RelaxationReport:
    """Convexify every registered relation into ``program``."""
    partitions = partitions or PartitionState()
    cap = cap if cap is not None else partitions.cap
    rows0, bins0 = len(program.rows), len(program.binaries)
    rep = RelaxationReport(terms_by_family=registry.family_counts())

    for q in registry.quadratics:
        if _pinned(program, q.m):
            m = program.lb[q.m]
            program.add_constraint(q.lhs, EQ, q.mu * m * m, f"quadfix:{q.family}")
            rep.quadratic_fixed += 1
        else:
            relax_quadratic_equality(program, q.lhs, q.mu, q.m, f"quad:{q.family}")
            rep.quadratic_cones += 1

    for p in registry.pumps:
        if _pinned(program, p.m):
            m = program.lb[p.m]
            program.add_constraint(program.x(p.rise), LE, p.a - p.b * m * m, "pumpfix")
        else:
            pump_convex_region(program, p.rise, p.m, p.a, p.b, "pump")
            rep.pump_cones += 1

    for t in registry.terms:
        # refresh bounds: the program may have been tightened after registration
        t.x_bounds = (program.lb[t.x], program.ub[t.x])
        t.y_bounds = (program.lb[t.y], program.ub[t.y])
        n = partitions.get(t.id)
        t.n = n
        rep.partitions[t.id] = n
        if _pinned(program, t.x) or _pinned(program, t.y):
            if _pinned(program, t.x):
                e = program.x(t.z) - program.x(t.y, t.c * program.lb[t.x])
            else:
                e = program.x(t.z) - program.x(t.x, t.c * program.lb[t.y])
            program.add_constraint(e, EQ, 0.0, f"lin:{t.family}")
            rep.linearized += 1
        elif n == 1:
            mccormick_envelope(t, program, f"mc:{t.family}")
            rep.mccormick += 1
        else:
            piecewise_envelope(t, n, program, cap, f"pw:{t.family}")
            rep.piecewise += 1

    rep.rows = len(program.rows) - rows0
    rep.cones = len(program.cones)
    rep.binaries = len(program.binaries) - bins0
    return rep
