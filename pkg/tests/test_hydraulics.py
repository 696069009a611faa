import math

import pytest

from chpd.case import PhysicalConstants
from chpd.conic import key
from chpd.dispatch import solve_dispatch_convex
from chpd.hydraulics import (KPA, HydraulicsError, friction_coefficient, friction_factor,
                             hydraulic_residuals, minor_loss_coefficient, pump_power_coefficient)
from chpd.relaxation import pump_region_coefficients


def test_friction_factor_value():
    f = friction_factor(0.2, 5e-4, 1e5)
    ref = 1.325 / math.log(5e-4 / (3.7 * 0.2) + 5.74 / 1e5**0.9) ** 2
    assert f == pytest.approx(ref, rel=1e-12)
    assert f == pytest.approx(0.0266, abs=1e-3)


def test_friction_factor_domain():
    with pytest.raises(HydraulicsError):
        friction_factor(0.2, 0.0, math.inf)


def test_friction_coefficient_needs_positive_geometry(mini):
    from dataclasses import replace
    with pytest.raises(HydraulicsError):
        friction_coefficient(replace(mini.pipes[0], diameter=0.0), mini.constants)


def test_friction_coefficient_darcy_weisbach(mini):
    p, c = mini.pipes[0], PhysicalConstants()
    f = friction_factor(p.diameter, p.roughness, p.reynolds)
    # dp = f L/D * rho v^2 / 2 with v = m / (rho A)
    m = 7.0
    v = m / (c.water_density * p.area)
    dp = f * p.length / p.diameter * c.water_density * v * v / 2
    assert friction_coefficient(p, c) * m * m == pytest.approx(dp, rel=1e-12)


def test_pump_power():
    # 100 kg/s against 3e5 Pa at 80 % efficiency: 37.5 kW
    p_mw = pump_power_coefficient(0.8, 1000.0) * 100.0 * (3e5 / KPA)
    assert p_mw == pytest.approx(0.0375, rel=1e-12)


def _single_pipe_point(case, m, rise):
    """Exact hydraulic state of the mini case (one pumped pipe 1 -> 2)."""
    c = case.constants
    p, hx = case.pipes[0], case.node(2)
    mu = friction_coefficient(p, c) / KPA
    kappa = minor_loss_coefficient(hx.minor_loss, hx.hx_area, c) / KPA
    vals = {}
    for t in range(case.T):
        pr1 = case.node(1).pr_bounds[0] / KPA
        ps1 = 230.0
        pr2 = pr1 + mu * m * m
        ps2 = ps1 + rise
        vals.update({key("m", p.key, t): m, key("min", 1, t): m, key("mout", 2, t): m,
                     key("ps", 1, t): ps1, key("ps", 2, t): ps2, key("pr", 1, t): pr1,
                     key("pr", 2, t): pr2, key("dpw", p.key, t): rise,
                     key("Pwp", p.key, t): pump_power_coefficient(p.pump.efficiency, c.water_density) * m * rise,
                     key("dpc", 2, t): ps2 - pr2 - kappa * m * m})
    return vals


def test_single_pipe_exact(mini):
    vals = _single_pipe_point(mini, 6.0, 300.0)
    rep = hydraulic_residuals(mini, vals)
    assert rep.max_abs() <= 1e-8
    a, b = pump_region_coefficients(99.02, 57.74, mini.constants.head_to_pressure, 1000.0, KPA)
    assert 300.0 <= a - b * 36.0


def test_zero_flow_pump_draws_nothing(mini):
    vals = _single_pipe_point(mini, 0.0, 500.0)
    assert all(vals[key("Pwp", "1-2", t)] == 0.0 for t in range(mini.T))
    assert hydraulic_residuals(mini, vals).max_abs(["dhs:pump-power"]) == 0.0


def test_continuity_residual(mini):
    vals = _single_pipe_point(mini, 6.0, 300.0)
    vals[key("mout", 2, 0)] = 5.0
    rep = hydraulic_residuals(mini, vals)
    assert rep.max_abs(["dhs:continuity"]) == pytest.approx(1.0)


def test_zero_pressure_residual_is_mu_m2(case5):
    m = 3.0
    vals = {key("m", p.key, 0): m for p in case5.pipes}
    rep = hydraulic_residuals(case5, vals)
    for p in case5.pipes:
        mu = friction_coefficient(p, case5.constants) / KPA
        e = next(e for e in rep.by_family("dhs:major-return") if e.label == f"{p.key},0")
        assert e.value == pytest.approx(mu * m * m, rel=1e-12)


def test_relaxed_losses_over_satisfied(case5):
    res = solve_dispatch_convex(case5)
    rep = hydraulic_residuals(case5, res.relaxed)
    for fam in ("dhs:major-supply", "dhs:major-return", "dhs:minor"):
        vals = [e.value for e in rep.by_family(fam)]
        assert vals and max(vals) <= 1e-6
