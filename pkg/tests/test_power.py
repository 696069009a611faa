import math

import pytest

from chpd.conic import OPTIMAL, key
from chpd.model import build_relaxed
from chpd.power import operating_cost, power_residuals
from chpd.solvers import solve_continuous
from conftest import two_bus_case
from oracles import two_bus_flow


def _solve(case):
    m = build_relaxed(case)
    s = solve_continuous(m.program)
    assert s.status == OPTIMAL
    return m, s


def test_lossless_line_sends_load():
    case = two_bus_case(r=0.0, x=0.0, p=0.8, q=0.3)
    _, s = _solve(case)
    assert s[key("Psub", 0)] == pytest.approx(0.8, abs=1e-7)
    assert s[key("Pbr", "1-2", 0)] == pytest.approx(0.8, abs=1e-7)
    assert s[key("Qbr", "1-2", 0)] == pytest.approx(0.3, abs=1e-7)


@pytest.mark.parametrize("r,p", [(0.01, 1.0), (0.05, 0.5), (0.1, 2.0)])
def test_two_bus_matches_oracle(r, p):
    case = two_bus_case(r=r, p=p)
    _, s = _solve(case)
    l, v2 = two_bus_flow(r, p)
    assert s[key("l", "1-2", 0)] == pytest.approx(l, abs=1e-6)
    assert s[key("v", 2, 0)] == pytest.approx(v2, abs=1e-6)
    assert s.objective == pytest.approx(p + r * l, abs=1e-6)


def test_exact_solution_has_tiny_residuals():
    r, p = 0.01, 1.0
    case = two_bus_case(r=r, p=p)
    l, v2 = two_bus_flow(r, p)
    P = p + r * l
    vals = {key("Psub", 0): P, key("Qsub", 0): 0.0, key("Pbr", "1-2", 0): P,
            key("Qbr", "1-2", 0): 0.0, key("l", "1-2", 0): l, key("v", 1, 0): 1.0,
            key("v", 2, 0): v2}
    rep = power_residuals(case, vals)
    assert rep.max_abs() <= 1e-8
    assert operating_cost(case, vals) == pytest.approx(P)


def test_zero_solution_residual_is_demand(case5):
    vals = {}
    rep = power_residuals(case5, vals)
    for t in range(case5.T):
        total = sum(b.p_demand[t] for b in case5.buses)
        bal = sum(e.value for e in rep.by_family("eps:bal-p") if e.label.endswith(f",{t}"))
        assert -bal == pytest.approx(total)


def test_soc_at_origin_has_slack():
    # P = Q = 0, l = v: ||(0, 0, l - v)|| = 0 <= l + v
    case = two_bus_case(p=0.0)
    m, s = _solve(case)
    cone = next(c for c in m.program.cones if c.tag == "eps:soc")
    x = s.x.copy()
    x[m.program.var(key("l", "1-2", 0))] = 1.0
    x[m.program.var(key("v", 1, 0))] = 1.0
    x[m.program.var(key("Pbr", "1-2", 0))] = 0.0
    x[m.program.var(key("Qbr", "1-2", 0))] = 0.0
    head, *tail = (e.value(x) for e in cone.entries)
    assert head - math.hypot(*tail) == pytest.approx(2.0)


def test_relaxed_bundled_case_reports_soc_slack(case5):
    _, s = _solve(case5)
    rep = power_residuals(case5, s)
    slacks = rep.by_family("eps:soc-slack")
    assert len(slacks) == len(case5.branches) * case5.T
    assert all(not e.checked for e in slacks)
    assert min(e.value for e in slacks) > -1e-6


def test_ramp_limits_respected(case5):
    _, s = _solve(case5)
    for d in case5.devices:
        if math.isinf(d.ramp_p):
            continue
        prev = d.initial_p
        for t in range(case5.T):
            cur = s[key("Pdev", d.id, t)]
            assert abs(cur - prev) <= d.ramp_p * case5.grid.hours + 1e-6
            prev = cur
