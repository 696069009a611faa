"""Residual reports for candidate solutions of the original (unrelaxed) model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class Residual:
    family: str
    label: str
    value: float
    scale: float = 1.0
    checked: bool = True

    @property
    def rel(self) -> float:
        return abs(self.value) / max(abs(self.scale), 1.0)


@dataclass
class ResidualReport:
    entries: list[Residual] = field(default_factory=list)

    def add(self, family: str, label: str, value: float, scale: float = 1.0,
            checked: bool = True) -> None:
        self.entries.append(Residual(family, label, float(value), float(scale), checked))

    def extend(self, other: "ResidualReport") -> "ResidualReport":
        self.entries.extend(other.entries)
        return self

    def _pick(self, families: Iterable[str] | None, checked_only: bool) -> list[Residual]:
        fam = None if families is None else set(families)
        return [e for e in self.entries
                if (fam is None or e.family in fam) and (e.checked or not checked_only)]

    def max_abs(self, families: Iterable[str] | None = None, checked_only: bool = True) -> float:
        return max((abs(e.value) for e in self._pick(families, checked_only)), default=0.0)

    def max_rel(self, families: Iterable[str] | None = None, checked_only: bool = True) -> float:
        return max((e.rel for e in self._pick(families, checked_only)), default=0.0)

    def worst(self, checked_only: bool = True) -> Residual | None:
        es = self._pick(None, checked_only)
        return max(es, key=lambda e: e.rel) if es else None

    def families(self) -> list[str]:
        return sorted({e.family for e in self.entries})

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for f in self.families():
            es = [e for e in self.entries if e.family == f]
            out[f] = {"count": len(es), "max_abs": max(abs(e.value) for e in es),
                      "max_rel": max(e.rel for e in es), "checked": es[0].checked}
        return out

    def by_family(self, family: str) -> list[Residual]:
        return [e for e in self.entries if e.family == family]
