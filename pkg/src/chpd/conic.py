"""Solver-agnostic conic program representation.

A :class:`ConicProgram` holds bounded continuous/binary variables, sparse
linear rows, second-order cones over affine expressions and a linear
objective (always minimised).  Builders address variables by integer index;
every variable also carries a unique string name so solutions can be looked
up without the builder's handle objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

INF = math.inf

EQ = "=="
LE = "<="
GE = ">="
_SENSES = (EQ, LE, GE)


def key(base: str, *idx) -> str:
    """Canonical variable name, e.g. ``key("m", 1, 2, 0) -> "m[1,2,0]"``."""
    if not idx:
        return base
    return f"{base}[{','.join(str(i) for i in idx)}]"


class LinExpr:
    """Sparse affine expression ``sum(coef * x[i]) + const``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    @classmethod
    def of(cls, *pairs: tuple[int, float], const: float = 0.0) -> "LinExpr":
        e = cls(const=const)
        for i, c in pairs:
            e.terms[i] = e.terms.get(i, 0.0) + c
        return e

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def add_term(self, i: int, c: float) -> "LinExpr":
        self.terms[i] = self.terms.get(i, 0.0) + c
        return self

    def _combine(self, other, sign: float) -> "LinExpr":
        out = self.copy()
        if isinstance(other, LinExpr):
            for i, c in other.terms.items():
                out.terms[i] = out.terms.get(i, 0.0) + sign * c
            out.const += sign * other.const
        else:
            out.const += sign * float(other)
        return out

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return LinExpr({i: -c for i, c in self.terms.items()}, -self.const)

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: k * c for i, c in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[i] for i, c in self.terms.items())

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*x{i}" for i, c in self.terms.items())
        return f"LinExpr({body or '0'} + {self.const:g})"


@dataclass
class Row:
    terms: dict[int, float]
    sense: str
    rhs: float
    tag: str = ""


@dataclass
class Cone:
    """``||entries[1:]||_2 <= entries[0]``, each entry affine."""

    entries: list[LinExpr]
    tag: str = ""

    @property
    def dim(self) -> int:
        return len(self.entries)


class ProgramError(ValueError):
    pass


class ConicProgram:
    def __init__(self, name: str = "program"):
        self.name = name
        self.names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self.index: dict[str, int] = {}
        self.rows: list[Row] = []
        self.cones: list[Cone] = []
        self.objective = LinExpr()

    # -- variables ---------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lb: float = -INF, ub: float = INF, binary: bool = False) -> int:
        if name in self.index:
            raise ProgramError(f"duplicate variable name {name!r}")
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ProgramError(f"empty bounds for {name!r}: [{lb}, {ub}]")
        i = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        self.index[name] = i
        return i

    def var(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"no variable named {name!r}") from None

    def x(self, i: int | str, coef: float = 1.0) -> LinExpr:
        if isinstance(i, str):
            i = self.var(i)
        return LinExpr({i: coef})

    def set_bounds(self, i: int, lb: float, ub: float) -> None:
        if lb > ub:
            raise ProgramError(f"empty bounds for {self.names[i]!r}: [{lb}, {ub}]")
        self.lb[i], self.ub[i] = float(lb), float(ub)

    def fix(self, i: int, value: float) -> None:
        self.lb[i] = self.ub[i] = float(value)

    @property
    def binaries(self) -> list[int]:
        return [i for i, b in enumerate(self.binary) if b]

    # -- constraints -------------------------------------------------------
    def _check(self, expr: LinExpr) -> None:
        n = self.num_vars
        for i in expr.terms:
            if not 0 <= i < n:
                raise ProgramError(f"expression references unknown variable {i}")

    def add_constraint(self, expr: LinExpr, sense: str, rhs: float = 0.0, tag: str = "") -> int:
        if sense not in _SENSES:
            raise ProgramError(f"unknown sense {sense!r}")
        self._check(expr)
        terms = {i: c for i, c in expr.terms.items() if c != 0.0}
        self.rows.append(Row(terms, sense, float(rhs) - expr.const, tag))
        return len(self.rows) - 1

    def add_cone(self, entries: Iterable[LinExpr], tag: str = "") -> int:
        entries = [e if isinstance(e, LinExpr) else LinExpr(const=e) for e in entries]
        if len(entries) < 2:
            raise ProgramError("a second-order cone needs at least two entries")
        for e in entries:
            self._check(e)
        self.cones.append(Cone(entries, tag))
        return len(self.cones) - 1

    def set_objective(self, expr: LinExpr) -> None:
        self._check(expr)
        self.objective = expr.copy()

    # -- inspection --------------------------------------------------------
    def count_rows(self, prefix: str = "") -> int:
        return sum(1 for r in self.rows if r.tag.startswith(prefix))

    def count_cones(self, prefix: str = "") -> int:
        return sum(1 for c in self.cones if c.tag.startswith(prefix))

    def violation(self, x: np.ndarray) -> float:
        """Largest absolute violation of bounds, rows and cones at ``x``."""
        x = np.asarray(x, dtype=float)
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        worst = float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))
        for r in self.rows:
            lhs = sum(c * x[i] for i, c in r.terms.items())
            if r.sense == EQ:
                worst = max(worst, abs(lhs - r.rhs))
            elif r.sense == LE:
                worst = max(worst, lhs - r.rhs)
            else:
                worst = max(worst, r.rhs - lhs)
        for c in self.cones:
            v = [e.value(x) for e in c.entries]
            worst = max(worst, math.hypot(*v[1:]) - v[0])
        for i in self.binaries:
            worst = max(worst, min(abs(x[i]), abs(1.0 - x[i])))
        return worst

    def copy(self) -> "ConicProgram":
        p = ConicProgram(self.name)
        p.names = list(self.names)
        p.lb = list(self.lb)
        p.ub = list(self.ub)
        p.binary = list(self.binary)
        p.index = dict(self.index)
        p.rows = [Row(dict(r.terms), r.sense, r.rhs, r.tag) for r in self.rows]
        p.cones = [Cone([e.copy() for e in c.entries], c.tag) for c in self.cones]
        p.objective = self.objective.copy()
        return p


# -- solutions -------------------------------------------------------------

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time-limit"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class SolveStats:
    iterations: int = 0
    nodes: int = 0
    wall_time: float = 0.0
    message: str = ""
    trace: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass
class Solution:
    status: str
    objective: float | None = None
    bound: float | None = None
    x: np.ndarray | None = None
    index: Mapping[str, int] = field(default_factory=dict, repr=False)
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def has_values(self) -> bool:
        return self.x is not None

    def __getitem__(self, name: str) -> float:
        if self.x is None:
            raise KeyError(f"solution with status {self.status!r} has no values")
        return float(self.x[self.index[name]])

    def __contains__(self, name: str) -> bool:
        return self.x is not None and name in self.index

    def get(self, name: str, default: float | None = None) -> float | None:
        if self.x is None or name not in self.index:
            return default
        return float(self.x[self.index[name]])

    def values(self) -> dict[str, float]:
        if self.x is None:
            return {}
        return {n: float(self.x[i]) for n, i in self.index.items()}

    def items(self) -> Iterator[tuple[str, float]]:
        return iter(self.values().items())


# -- sparse text format ------------------------------------------------------
#
#   CONIC 1 <name>
#   VARS <n>
#   <name> <lb> <ub> <C|B>                       (one line per variable)
#   OBJ <const> <i>:<coef> ...
#   ROWS <m>
#   <sense> <rhs> <tag|-> <i>:<coef> ...
#   CONES <k>
#   CONE <dim> <tag|->
#   <const> <i>:<coef> ...                       (dim lines, first is the bound)
#   END
#
# Names and tags must not contain whitespace; floats use repr() so the round
# trip is exact.


def _fmt_terms(terms: Mapping[int, float]) -> str:
    return " ".join(f"{i}:{c!r}" for i, c in sorted(terms.items()))


def _parse_terms(tokens: list[str]) -> dict[int, float]:
    out: dict[int, float] = {}
    for tok in tokens:
        i, c = tok.split(":")
        out[int(i)] = float(c)
    return out


def dumps(program: ConicProgram) -> str:
    lines = [f"CONIC 1 {program.name}", f"VARS {program.num_vars}"]
    for n, lo, hi, b in zip(program.names, program.lb, program.ub, program.binary):
        lines.append(f"{n} {lo!r} {hi!r} {'B' if b else 'C'}")
    lines.append(f"OBJ {program.objective.const!r} {_fmt_terms(program.objective.terms)}".rstrip())
    lines.append(f"ROWS {len(program.rows)}")
    for r in program.rows:
        lines.append(f"{r.sense} {r.rhs!r} {r.tag or '-'} {_fmt_terms(r.terms)}".rstrip())
    lines.append(f"CONES {len(program.cones)}")
    for c in program.cones:
        lines.append(f"CONE {c.dim} {c.tag or '-'}")
        for e in c.entries:
            lines.append(f"{e.const!r} {_fmt_terms(e.terms)}".rstrip())
    lines.append("END")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ConicProgram:
    it = iter(text.splitlines())
    try:
        head = next(it).split()
        if head[:2] != ["CONIC", "1"]:
            raise ProgramError("not a conic program file")
        prog = ConicProgram(head[2] if len(head) > 2 else "program")
        n = int(next(it).split()[1])
        for _ in range(n):
            name, lo, hi, kind = next(it).split()
            prog.add_var(name, float(lo), float(hi), kind == "B")
        obj = next(it).split()
        prog.objective = LinExpr(_parse_terms(obj[2:]), float(obj[1]))
        m = int(next(it).split()[1])
        for _ in range(m):
            tok = next(it).split()
            tag = "" if tok[2] == "-" else tok[2]
            prog.rows.append(Row(_parse_terms(tok[3:]), tok[0], float(tok[1]), tag))
        k = int(next(it).split()[1])
        for _ in range(k):
            _, dim, tag = next(it).split()
            entries = []
            for _ in range(int(dim)):
                tok = next(it).split()
                entries.append(LinExpr(_parse_terms(tok[1:]), float(tok[0])))
            prog.cones.append(Cone(entries, "" if tag == "-" else tag))
        if next(it).strip() != "END":
            raise ProgramError("missing END marker")
    except (StopIteration, IndexError, ValueError) as exc:
        if isinstance(exc, ProgramError):
            raise
        raise ProgramError(f"malformed program text: {exc}") from exc
    return prog


def save(program: ConicProgram, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(program))


def load(path) -> ConicProgram:
    with open(path) as fh:
        return loads(fh.read())
