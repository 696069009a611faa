import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chpd.conic import GE, INFEASIBLE, OPTIMAL, ConicProgram, LinExpr
from chpd.relaxation import (BilinearRegistry, BilinearTerm, PartitionState, RelaxationError,
                             active_cell, mccormick_envelope, piecewise_envelope,
                             pump_convex_region, pump_region_coefficients,
                             relax_quadratic_equality, warm_binaries)
from chpd.solvers import solve_misocp
from oracles import piecewise_witness, z_interval


def _term(xb=(0.0, 1.0), yb=(0.0, 1.0), c=1.0, n=1):
    p = ConicProgram()
    x = p.add_var("x", *xb)
    y = p.add_var("y", *yb)
    z = p.add_var("z")
    reg = BilinearRegistry()
    t = reg.register(p, z, x, y, c, "std", "t")
    t.n = n
    return p, t


def _cone_slack(p, cone_id, x):
    head, *tail = (e.value(x) for e in p.cones[cone_id].entries)
    return head - math.hypot(*tail)


@pytest.mark.parametrize("offset,sign", [(0.0, 0), (1.0, 1), (-1.0, -1)])
def test_quadratic_cone_direction(offset, sign):
    mu, m = 0.7, 3.0
    p = ConicProgram()
    lhs = p.add_var("lhs")
    mi = p.add_var("m")
    cid = relax_quadratic_equality(p, p.x(lhs), mu, mi)
    slack = _cone_slack(p, cid, np.array([mu * m * m + offset, m]))
    if sign == 0:
        assert slack == pytest.approx(0.0, abs=1e-9)
    else:
        assert np.sign(slack) == sign


def test_quadratic_needs_positive_mu():
    p = ConicProgram()
    a = p.add_var("a")
    with pytest.raises(RelaxationError):
        relax_quadratic_equality(p, p.x(a), 0.0, a)


def test_mccormick_center():
    p, t = _term()
    mccormick_envelope(t, p)
    lo, hi = z_interval(p, t.z, {t.x: 0.5, t.y: 0.5})
    assert (lo, hi) == pytest.approx((0.0, 0.5))
    assert lo <= 0.25 <= hi


def test_mccormick_degenerate_box():
    p, t = _term(xb=(0.3, 0.3), yb=(-2.0, 5.0), c=2.0)
    mccormick_envelope(t, p)
    for y in (-2.0, 0.0, 1.7, 5.0):
        lo, hi = z_interval(p, t.z, {t.x: 0.3, t.y: y})
        assert lo == pytest.approx(0.6 * y) and hi == pytest.approx(0.6 * y)


@pytest.mark.parametrize("c", [1.5, -0.4])
def test_mccormick_vertex_tight(c):
    p, t = _term(xb=(-1.0, 2.0), yb=(3.0, 4.0), c=c)
    mccormick_envelope(t, p)
    for x in (-1.0, 2.0):
        for y in (3.0, 4.0):
            lo, hi = z_interval(p, t.z, {t.x: x, t.y: y})
            assert lo == pytest.approx(c * x * y) and hi == pytest.approx(c * x * y)


def test_mccormick_rejects_n_gt_1():
    p, t = _term(n=2)
    with pytest.raises(RelaxationError):
        mccormick_envelope(t, p)


def test_term_validation():
    with pytest.raises(RelaxationError):
        BilinearTerm(0, 0, 1, 2, 1.0, (0.0, math.inf), (0.0, 1.0), "std", "bad")
    with pytest.raises(RelaxationError):
        BilinearTerm(0, 0, 1, 2, 1.0, (1.0, 0.0), (0.0, 1.0), "std", "bad")


def test_center_gap_formula():
    c, xb, yb = 0.37, (2.0, 7.0), (-3.0, 1.5)
    p, t = _term(xb, yb, c)
    mccormick_envelope(t, p)
    xc, yc = sum(xb) / 2, sum(yb) / 2
    lo, hi = z_interval(p, t.z, {t.x: xc, t.y: yc})
    expected = c * (xb[1] - xb[0]) * (yb[1] - yb[0]) / 4
    assert c * xc * yc - lo == pytest.approx(expected, abs=1e-9)
    assert hi - c * xc * yc == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_piecewise_sizes(n):
    p, t = _term(n=n)
    before = p.num_vars
    blk = piecewise_envelope(t, n, p)
    assert len(blk.alpha) + len(blk.beta) == 2 * n
    assert len(p.binaries) == 2 * n
    assert sum(len(r) for r in blk.phi) == (n + 1) ** 2
    assert p.num_vars - before == 2 * n + (n + 1) ** 2


def test_piecewise_cap():
    p, t = _term()
    with pytest.raises(RelaxationError):
        piecewise_envelope(t, 5, p, cap=4)


def _z_range_pw(p, t, x, y):
    out = []
    for sgn in (1.0, -1.0):
        q = p.copy()
        q.fix(t.x, x)
        q.fix(t.y, y)
        q.set_objective(LinExpr({t.z: sgn}))
        s = solve_misocp(q, gap=1e-9)
        assert s.status == OPTIMAL
        out.append(sgn * s.objective)
    return tuple(out)


def test_piecewise_n1_equals_mccormick():
    xb, yb, c = (0.0, 4.0), (-1.0, 3.0), 0.8
    p1, t1 = _term(xb, yb, c)
    blk = piecewise_envelope(t1, 1, p1)
    p2, t2 = _term(xb, yb, c)
    mccormick_envelope(t2, p2)
    q = p1.copy()
    q.set_objective(LinExpr({a: 1.0 for a in blk.alpha + blk.beta}))
    s = solve_misocp(q)
    assert s.objective == pytest.approx(2.0)  # both binaries forced to 1
    rng = np.random.default_rng(3)
    for x, y in rng.uniform((0, -1), (4, 3), size=(6, 2)):
        lo, hi = _z_range_pw(p1, t1, x, y)
        mlo, mhi = z_interval(p2, t2.z, {t2.x: x, t2.y: y})
        assert lo == pytest.approx(mlo, abs=1e-6) and hi == pytest.approx(mhi, abs=1e-6)


def test_piecewise_grid_points_exact():
    n, xb, yb, c = 3, (0.0, 3.0), (10.0, 16.0), 2.0
    p, t = _term(xb, yb, c, n)
    piecewise_envelope(t, n, p)
    for x in (1.0, 2.0):
        for y in (12.0, 16.0):
            lo, hi = _z_range_pw(p, t, x, y)
            assert lo == pytest.approx(c * x * y, abs=1e-6)
            assert hi == pytest.approx(c * x * y, abs=1e-6)


def test_piecewise_tightens_midpoint():
    p1, t1 = _term(n=1)
    mccormick_envelope(t1, p1)
    p4, t4 = _term(n=4)
    piecewise_envelope(t4, 4, p4)
    w1 = np.diff(z_interval(p1, t1.z, {t1.x: 0.4, t1.y: 0.6}))[0]
    lo, hi = _z_range_pw(p4, t4, 0.4, 0.6)
    assert hi - lo < w1 / 3


def test_cell_and_warm_binaries():
    p, t = _term(xb=(0.0, 4.0), yb=(0.0, 1.0), n=4)
    assert active_cell(t, 4, 0.0, 1.0) == (1, 4)
    assert active_cell(t, 4, 2.5, 0.25) == (3, 1)
    w = warm_binaries(t, 4, 2.5, 0.6)
    assert w["alpha[t0,3]"] == 1.0 and sum(v for k, v in w.items() if k.startswith("alpha")) == 1.0
    assert w["beta[t0,3]"] == 1.0


def test_partition_state():
    reg = BilinearRegistry()
    p = ConicProgram()
    for i in range(3):
        a, b, z = (p.add_var(f"{v}{i}", 0, 1) for v in "abz")
        reg.register(p, z, a, b, 1.0, "mixing", f"m{i}")
    ps = PartitionState(cap=3)
    assert ps.get(2) == 1
    assert ps.refine(2, 0.5) == 2
    assert ps.refine(2, 0.4) == 3
    with pytest.raises(RelaxationError):
        ps.refine(2, 0.1)
    assert ps.history == [(1, 2, 0.5), (2, 2, 0.4)]
    cp = ps.copy()
    cp.refine(0, 1.0)
    assert ps.get(0) == 1
    assert PartitionState.uniform(reg, 2).n == {0: 2, 1: 2, 2: 2}
    with pytest.raises(RelaxationError):
        reg.register(p, 0, 1, 2, 1.0, "nope", "x")


def test_gap_definition():
    p, t = _term(xb=(0, 10), yb=(0, 10))
    vals = {t.z: 10.0, t.x: 3.0, t.y: 3.0}
    assert t.gap(vals) == pytest.approx(0.1)
    # guarded denominator near z = 0
    assert t.gap({t.z: 0.0, t.x: 0.1, t.y: 0.1}) == pytest.approx(0.01 / 1e-3)


# pump region: rise <= a - b m^2 with the bundled pump curve data
G1, G2 = 99.02, 57.74


def _pump(rise, m):
    cpa = 1000 * 9.81
    a, b = pump_region_coefficients(G1, G2, cpa, 1000.0)
    p = ConicProgram()
    r = p.add_var("r")
    mi = p.add_var("m")
    cid = pump_convex_region(p, r, mi, a, b)
    return a, b, _cone_slack(p, cid, np.array([rise, m]))


def test_pump_shutoff():
    a, _, slack = _pump(9810.0 * G1, 0.0)
    assert a == pytest.approx(9810.0 * G1)
    assert slack == pytest.approx(0.0, abs=1e-6 * a)
    assert _pump(9810.0 * G1 * 1.001, 0.0)[2] < 0


def test_pump_curve_w1_is_boundary():
    # gamma3 = 2, w = 1: H = g1 - g2 q^2 with q = m / rho
    m = 60.0
    q = m / 1000.0
    rise = 9810.0 * (G1 - G2 * q * q)
    a, b, slack = _pump(rise, m)
    assert rise == pytest.approx(a - b * m * m)
    assert abs(slack) <= 1e-9 * a
    assert _pump(rise - 1.0, m)[2] > 0


def test_pump_region_infeasible_in_solver():
    p = ConicProgram()
    r = p.add_var("r")
    mi = p.add_var("m", 0.0, 0.0)
    pump_convex_region(p, r, mi, 10.0, 1.0)
    p.add_constraint(p.x(r), GE, 10.5)
    assert solve_misocp(p).status == INFEASIBLE


FAMILY_BOXES = {
    # (x box, y box, c) typical of each family
    "pump-power": ((0.0, 300.0), (0.0, 970.0), 1.25e-6),
    "heat-transfer": ((0.0, 200.0), (0.0, 80.0), 4.182e-3),
    "mixing": ((0.0, 150.0), (-70.0, 70.0), 1.0),
    "std": ((0.0, 200.0), (-80.0, 10.0), 1.0),
}


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(sorted(FAMILY_BOXES)), st.sampled_from([1, 2, 4]),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_envelope_contains_product(fam, n, u, v, s1, s2):
    (xl, xu), (yl, yu), c = FAMILY_BOXES[fam]
    # random sub-box, then a point in it
    xa, xb = sorted((xl + s1 * (xu - xl), xl + (1 - s1 * s2) * (xu - xl)))
    ya, yb = sorted((yl + s2 * (yu - yl), yl + (1 - s1) * (yu - yl)))
    p, t = _term((xa, xb), (ya, yb), c, n)
    x, y = xa + u * (xb - xa), ya + v * (yb - ya)
    if n == 1:
        mccormick_envelope(t, p)
        lo, hi = z_interval(p, t.z, {t.x: x, t.y: y})
        z = c * x * y
        tol = 1e-9 * max(1.0, abs(z))
        assert lo - tol <= z <= hi + tol
    else:
        blk = piecewise_envelope(t, n, p)
        w = piecewise_witness(p, blk, t, x, y)
        assert p.violation(w) <= 1e-9 * max(1.0, abs(c * x * y))
