"""Command line interface.

    chpd solve    --case case33_30 --mode convex --out runs/convex
    chpd simulate --case case33_30 --pipe 1-2 --out runs/sim
    chpd validate --case my_case.json
    chpd bench    --case case5_4 --out runs/bench

Exit codes: 0 success, 1 infeasible, 2 input error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .case import CaseParseError, TimeGrid, load_case, validate_case
from .conic import INFEASIBLE, UNBOUNDED
from .dispatch import (DispatchResult, adaptive_solve, solve_constant_flow,
                       solve_dispatch_convex, solve_dispatch_misocp)
from .pipesim import onset, validate_pipe
from .report import write_result

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


def _exit_code(res: DispatchResult) -> int:
    if res.feasible:
        return EXIT_OK
    if res.status in (INFEASIBLE, UNBOUNDED):
        return EXIT_INFEASIBLE
    return EXIT_SOLVER


def _flow_arg(case, text: str | None):
    """A number, a named setting from the case meta, or a JSON map pipe -> kg/s."""
    settings = case.meta.get("constant_flow", {})
    if text is None:
        if "high" not in settings:
            raise ValueError("--fixed-flow is required: the case has no constant_flow settings")
        return settings["high"]
    if text in settings:
        return settings[text]
    try:
        return float(text)
    except ValueError:
        pass
    p = Path(text)
    doc = json.loads(p.read_text()) if p.exists() else json.loads(text)
    return {str(k): float(v) for k, v in doc.items()}


def _print(res: DispatchResult) -> None:
    s = res.summary()
    print(f"{res.method}: status={s['status']} objective={s['objective']} "
          f"relaxed={s['relaxed_objective']} bound={s['bound']} time={s['wall_time']:.1f}s")
    if res.message:
        print(f"  {res.message}")


def cmd_solve(args) -> int:
    case = load_case(args.case)
    if args.mode == "convex":
        res = solve_dispatch_convex(case, time_limit=args.time_limit)
    elif args.mode == "misocp":
        res = solve_dispatch_misocp(case, args.partitions, gap=args.gap, time_limit=args.time_limit)
    elif args.mode == "adaptive":
        res = adaptive_solve(case, args.time_limit or 1800.0, gap=args.gap,
                             max_iterations=args.max_iterations)
    else:
        res = solve_constant_flow(case, _flow_arg(case, args.fixed_flow))
    _print(res)
    if args.out:
        write_result(case, res, args.out)
    return _exit_code(res)


def cmd_simulate(args) -> int:
    case = load_case(args.case)
    pipe = case.pipe(args.pipe or case.meta.get("validation_pipe", case.pipes[0].key))
    grid = TimeGrid(args.step, args.periods)
    rows, series = [], []
    for m in args.flows:
        run = validate_pipe(pipe, m, grid, ground=args.ground)
        up = args.periods // 4
        rows.append({"flow_kg_s": m, "mean_rel_err": run.mean_rel_err,
                     "max_rel_err": float(run.rel_err.max()),
                     "onset_node_method": onset(run.node_method, up), "onset_std": onset(run.std, up)})
        series += [{"flow_kg_s": m, "period": t, "inlet_c": run.inlet[t],
                    "node_method_c": run.node_method[t], "std_c": run.std[t],
                    "rel_err": run.rel_err[t]} for t in range(args.periods)]
    for r in rows:
        print(f"m={r['flow_kg_s']:g} kg/s: mean rel err {100 * r['mean_rel_err']:.3f}% "
              f"(max {100 * r['max_rel_err']:.2f}%), onset NM {r['onset_node_method']} STD {r['onset_std']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, data in (("validation.csv", rows), ("series.csv", series)):
            with open(out / name, "w", newline="") as fh:
                w = csv.DictWriter(fh, list(data[0]))
                w.writeheader()
                w.writerows(data)
    return EXIT_OK


def cmd_validate(args) -> int:
    case = load_case(args.case)
    rep = validate_case(case)
    for issue in rep:
        print(issue)
    print(f"{case.name}: {'ok' if rep.ok else f'{len(rep.errors) + len(rep.topology)} problem(s)'}")
    return EXIT_OK if rep.ok else EXIT_INPUT


def cmd_bench(args) -> int:
    case = load_case(args.case)
    settings = case.meta.get("constant_flow", {})
    rows = []

    def add(label, res):
        rows.append({"method": label, "status": res.status, "relaxed_obj": res.relaxed_objective,
                     "recovered_obj": res.objective, "wall_time_s": res.wall_time})
        _print(res)

    add("convex n=1", solve_dispatch_convex(case))
    add(f"misocp n={args.partitions}", solve_dispatch_misocp(
        case, args.partitions, gap=args.gap, time_limit=args.time_limit))
    for name in ("high", "mid", "low"):
        if name in settings:
            add(f"constant-flow {name} ({settings[name]:g} kg/s)",
                solve_constant_flow(case, settings[name]))
    print()
    print(f"{'method':<36}{'relaxed':>12}{'recovered':>12}{'time [s]':>10}")
    for r in rows:
        rel = "-" if r["relaxed_obj"] is None else f"{r['relaxed_obj']:.2f}"
        rec = "-" if r["recovered_obj"] is None else f"{r['recovered_obj']:.2f}"
        print(f"{r['method']:<36}{rel:>12}{rec:>12}{r['wall_time_s']:>10.1f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chpd", description="Combined heat and power dispatch")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a dispatch case")
    s.add_argument("--case", required=True, help="case file or bundled name")
    s.add_argument("--mode", choices=["convex", "misocp", "adaptive", "constant-flow"], default="convex")
    s.add_argument("--partitions", type=int, default=2, help="uniform partitions (misocp)")
    s.add_argument("--time-limit", type=float, default=None, help="seconds")
    s.add_argument("--gap", type=float, default=1e-4, help="relative optimality gap")
    s.add_argument("--max-iterations", type=int, default=None, help="adaptive iteration cap")
    s.add_argument("--fixed-flow", default=None,
                   help="kg/s, a named setting (high/mid/low) or a JSON pipe->flow map")
    s.add_argument("--out", default=None, help="output directory")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="STD vs node-method validation on one pipe")
    m.add_argument("--case", required=True)
    m.add_argument("--pipe", default=None, help="pipe key, e.g. 1-2")
    m.add_argument("--flows", type=float, nargs="+", default=[150.0, 30.0])
    m.add_argument("--step", type=float, default=900.0, help="step length (s)")
    m.add_argument("--periods", type=int, default=96)
    m.add_argument("--ground", type=float, default=10.0)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="check a case file")
    v.add_argument("--case", required=True)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="convex / misocp / constant-flow comparison")
    b.add_argument("--case", required=True)
    b.add_argument("--partitions", type=int, default=2)
    b.add_argument("--time-limit", type=float, default=300.0, help="misocp time limit (s)")
    b.add_argument("--gap", type=float, default=1e-4)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CaseParseError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # solver or numerical failure
        logging.getLogger(__name__).exception("solver failure")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def run_cli(args: list[str] | None = None) -> int:
    return main(args)


if __name__ == "__main__":
    sys.exit(main())
