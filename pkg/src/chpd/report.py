"""Result files: summary.json, schedules.csv, trace.csv, residuals.csv.

schedules.csv has one row per period per element with columns

    period      index t (0-based)
    element     bus / device / pipe / node id
    kind        substation | generator | chp | heat_pump | pv | wt | pump | pipe | node
    p_mw        active power (injection for sources, consumption for heat
                pumps and pumps)
    q_mvar      reactive power
    heat_mw     heat output (chp, heat pump) or demand (node)
    flow_kg_s   pipe flow, or node outflow (exchangers) / injection (sources)
    ts_c, tr_c  supply / return temperature at the node, or pipe outlet
    ps_kpa, pr_kpa  supply / return pressure (nodes)

Empty cells mean "not applicable".
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .case import Case
from .conic import key
from .dispatch import DispatchResult

SCHEDULE_COLUMNS = ["period", "element", "kind", "p_mw", "q_mvar", "heat_mw", "flow_kg_s",
                    "ts_c", "tr_c", "ps_kpa", "pr_kpa"]
TRACE_COLUMNS = ["iteration", "refined_term", "refined_label", "relaxed_obj", "bound",
                 "max_gap", "recovered_obj", "best_obj", "binaries", "nodes", "wall_time_s",
                 "status"]
RESIDUAL_COLUMNS = ["family", "count", "max_abs", "max_rel", "checked"]


def schedule_rows(case: Case, values: dict[str, float]) -> list[dict]:
    g = values.get
    rows = []
    for t in range(case.T):
        rows.append({"period": t, "element": f"bus{case.substation.bus}", "kind": "substation",
                     "p_mw": g(key("Psub", t)), "q_mvar": g(key("Qsub", t))})
        for d in case.devices:
            rows.append({"period": t, "element": d.id, "kind": d.kind,
                         "p_mw": g(key("Pdev", d.id, t)), "q_mvar": g(key("Qdev", d.id, t)),
                         "heat_mw": g(key("Hdev", d.id, t))})
        for p in case.pipes:
            rows.append({"period": t, "element": p.key, "kind": "pump" if p.pump else "pipe",
                         "p_mw": g(key("Pwp", p.key, t)), "flow_kg_s": g(key("m", p.key, t)),
                         "ts_c": g(key("tso", p.key, t)), "tr_c": g(key("tro", p.key, t))})
        for n in case.nodes:
            k = n.id
            flow = g(key("mout", k, t), g(key("min", k, t)))
            rows.append({"period": t, "element": f"node{k}", "kind": "node",
                         "heat_mw": n.heat_demand[t] if n.is_exchanger else None,
                         "flow_kg_s": flow, "ts_c": g(key("ts", k, t)), "tr_c": g(key("tr", k, t)),
                         "ps_kpa": g(key("ps", k, t)), "pr_kpa": g(key("pr", k, t))})
    return rows


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in columns})


def write_result(case: Case, result: DispatchResult, out: str | Path,
                 extra: dict | None = None) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"case": case.name, **result.summary(), **(extra or {})}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    values = result.solution.values() if result.solution is not None else (
        result.relaxed.values() if result.relaxed is not None else {})
    _write_csv(out / "schedules.csv", SCHEDULE_COLUMNS, schedule_rows(case, values) if values else [])
    _write_csv(out / "trace.csv", TRACE_COLUMNS, [
        {"iteration": r.iteration, "refined_term": r.refined, "refined_label": r.refined_label,
         "relaxed_obj": r.relaxed, "bound": r.bound, "max_gap": r.max_gap,
         "recovered_obj": r.recovered, "best_obj": r.best, "binaries": r.binaries,
         "nodes": r.nodes, "wall_time_s": r.wall_time, "status": r.status}
        for r in result.trace])
    res_rows = []
    if result.residuals is not None:
        for fam, s in result.residuals.summary().items():
            res_rows.append({"family": fam, **s})
    _write_csv(out / "residuals.csv", RESIDUAL_COLUMNS, res_rows)
    return out
