"""Assembly of the full coupled model."""
from __future__ import annotations

from dataclasses import dataclass

from .case import Case
from .conic import ConicProgram
from .hydraulics import HydraulicVarHandles, build_hydraulic_relations
from .power import PowerVarHandles, build_power_constraints
from .relaxation import BilinearRegistry, PartitionState, RelaxationReport, relax_all
from .thermal import ThermalVarHandles, build_thermal_relations


@dataclass
class Model:
    case: Case
    program: ConicProgram
    registry: BilinearRegistry
    power: PowerVarHandles
    hydraulics: HydraulicVarHandles
    thermal: ThermalVarHandles
    report: RelaxationReport | None = None


def build_model(case: Case, fixed_flows: dict[str, float] | None = None) -> Model:
    """Build the unrelaxed model; ``fixed_flows`` pins flow variables by name."""
    program = ConicProgram(case.name)
    registry = BilinearRegistry()
    hyd = build_hydraulic_relations(case, program, registry)
    pw = build_power_constraints(case, program)
    th = build_thermal_relations(case, program, registry)
    program.set_objective(pw.cost)
    if fixed_flows:
        for name, v in fixed_flows.items():
            i = program.var(name)
            lo, hi = program.lb[i], program.ub[i]
            if v < lo - 1e-9 or v > hi + 1e-9:
                raise ValueError(f"fixed flow {name}={v} outside bounds [{lo}, {hi}]")
            program.fix(i, min(max(v, lo), hi))
    return Model(case, program, registry, pw, hyd, th)


def build_relaxed(case: Case, partitions: PartitionState | None = None,
                  fixed_flows: dict[str, float] | None = None, cap: int | None = None) -> Model:
    model = build_model(case, fixed_flows)
    model.report = relax_all(case, model.program, model.registry, partitions, cap)
    return model
