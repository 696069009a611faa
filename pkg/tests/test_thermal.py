from dataclasses import replace

import numpy as np
import pytest

from chpd.conic import OPTIMAL, key
from chpd.model import build_relaxed
from chpd.solvers import solve_continuous
from chpd.thermal import (MW, bilinear_count, mccormick_gaps, mixing_streams, std_coefficients,
                          thermal_residuals)
from conftest import mini_dhs_case


def test_bilinear_counts(case33, case5):
    assert bilinear_count(case33) == 2688 == 112 * case33.T
    assert bilinear_count(case5) == 12 * case5.T
    for case in (case33, case5):
        assert len(build_relaxed(case).registry.terms) == bilinear_count(case)


def test_chp_heat_ratio():
    case = mini_dhs_case(T=1, heat=(2.6,), elec=(0.5,))
    chp = replace(case.devices[0], heat_ratio=1.2, p_max=2.0)
    hp = replace(case.devices[1], p_max=1.0)
    case = replace(case, devices=(chp, hp))
    m = build_relaxed(case)
    m.program.fix(m.program.var(key("Pdev", "CHP", 0)), 2.0)
    s = solve_continuous(m.program)
    assert s.status == OPTIMAL
    assert s[key("Hdev", "CHP", 0)] == pytest.approx(2.4, abs=1e-7)


def test_single_inflow_mixing_is_identity(mini):
    assert len(mixing_streams(mini, 2, "S")) == 1
    s = solve_continuous(build_relaxed(mini).program)
    for t in range(mini.T):
        assert s[key("ts", 2, t)] == pytest.approx(s[key("tso", "1-2", t)], abs=1e-7)


def test_max_drop_bounds_exchanger(mini):
    prog = build_relaxed(mini).program
    for t in range(mini.T):
        assert prog.ub[prog.var(key("dload", 2, t))] == 58.0


def _std_outlet(case, pipe, tin, m, prev, tgd):
    # (tavg - prev) + a m (tout - tin) + b (tavg - tgd) = 0 with tavg = (tin + tout) / 2
    a, b = std_coefficients(pipe, case)
    A = np.array([[1 + b, a * m], [1.0, -0.5]])
    rhs = np.array([prev + b * tgd + a * m * tin, 0.5 * tin])
    return np.linalg.solve(A, rhs)  # (tavg, tout)


def test_two_node_exact_solution():
    case = mini_dhs_case(T=1, heat=(1.0,), elec=(0.5,))
    pipe, cw = case.pipes[0], case.constants.specific_heat * MW
    m, t_src, H = 8.0, 95.0, 1.0
    tgd = case.ground_temp[0]
    tsa, tso = _std_outlet(case, pipe, t_src, m, pipe.ts_init, tgd)
    trout = tso - H / (cw * m)
    tra, tro = _std_outlet(case, pipe, trout, m, pipe.tr_init, tgd)
    H_src = cw * m * (t_src - tro)
    vals = {key("m", "1-2", 0): m, key("min", 1, 0): m, key("mout", 2, 0): m,
            key("tsin", 1, 0): t_src, key("ts", 1, 0): t_src, key("tr", 1, 0): tro,
            key("tsi", "1-2", 0): t_src, key("tso", "1-2", 0): tso, key("tsa", "1-2", 0): tsa,
            key("ts", 2, 0): tso, key("trout", 2, 0): trout, key("tr", 2, 0): trout,
            key("tri", "1-2", 0): trout, key("tro", "1-2", 0): tro, key("tra", "1-2", 0): tra,
            key("Pdev", "CHP", 0): 0.0, key("Hdev", "CHP", 0): 0.0,
            key("Pdev", "HP", 0): H_src / 3.0, key("Hdev", "HP", 0): H_src}
    rep = thermal_residuals(case, vals)
    assert rep.max_abs() <= 1e-8
    # losses: the source produces more than the load takes
    assert H_src > H


def test_relaxed_reports_mccormick_gaps(mini):
    model = build_relaxed(mini)
    s = solve_continuous(model.program)
    rep = mccormick_gaps(model.registry, s)
    assert len(rep.entries) == len(model.registry.terms)
    for term, e in zip(model.registry.terms, rep.entries):
        assert e.value == pytest.approx(s.x[term.z] - term.c * s.x[term.x] * s.x[term.y])
        assert not e.checked


def test_source_and_load_heat_registered(case5):
    fams = build_relaxed(case5).registry.family_counts()
    T = case5.T
    assert fams["heat-transfer"] == T * (len(case5.exchangers) + len(case5.source_nodes))
    assert fams["std"] == 2 * T * len(case5.pipes)
    assert fams["pump-power"] == T * len(case5.pumps)
