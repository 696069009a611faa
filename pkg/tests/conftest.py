import pytest

from chpd.case import (Branch, Bus, Case, Chp, DhsNode, HeatPump, PhysicalConstants, PipeSpec,
                       PumpSpec, Substation, TimeGrid, bundled_case)


def two_bus_case(r=0.01, x=0.0, p=1.0, q=0.0, T=1, cost=1.0) -> Case:
    """Root bus 1 feeding a single load at bus 2 (base 1 MVA, no heat network)."""
    buses = (Bus(1, 1.0, 1.0, (0.0,) * T, (0.0,) * T),
             Bus(2, 0.5, 1.5, (p,) * T, (q,) * T))
    return Case("two-bus", PhysicalConstants(), TimeGrid(3600.0, T), 1.0,
                Substation(1, cost), buses, (Branch(1, 2, r, x),), (), (), (), (10.0,) * T)


def mini_dhs_case(T=2, heat=(1.0, 0.8), elec=(0.5, 0.4), m_bounds=(0.0, 20.0),
                  conductivity=0.3, ground=8.0, hp_cost=0.0, chp_cost=40.0) -> Case:
    """3-bus feeder + source/exchanger pair joined by one pumped pipe."""
    heat = tuple(heat)[:T]
    elec = tuple(elec)[:T]
    buses = (Bus(1, 0.81, 1.21, (0.0,) * T, (0.0,) * T),
             Bus(2, 0.81, 1.21, elec, tuple(0.3 * e for e in elec)),
             Bus(3, 0.81, 1.21, (0.0,) * T, (0.0,) * T))
    branches = (Branch(1, 2, 0.002, 0.001), Branch(2, 3, 0.003, 0.002))
    devices = (
        Chp(id="CHP", bus=3, p_min=0.0, p_max=0.6, q_min=-0.3, q_max=0.3, cost=chp_cost,
            heat_ratio=1.3, dhs_node=1),
        HeatPump(id="HP", bus=2, p_min=0.0, p_max=0.6, cost=hp_cost, cop=3.0, dhs_node=1),
    )
    nodes = (
        DhsNode(1, (0.0,) * T, (60.0, 100.0), (20.0, 70.0), (200e3, 260e3), (150e3, 1500e3),
                (0.0, 30.0)),
        DhsNode(2, heat, (60.0, 100.0), (30.0, 70.0), (150e3, 1500e3), (150e3, 1500e3),
                (0.0, 30.0), 0.01, 10.0, 58.0),
    )
    pipes = (PipeSpec(1, 2, 500.0, 0.1, 5e-4, 1e5, conductivity, m_bounds, False,
                      PumpSpec(99.02, 57.74, 2.156, 0.6, 0.5, 3), 90.0, 40.0),)
    return Case("mini", PhysicalConstants(), TimeGrid(3600.0, T), 10.0, Substation(1, 50.0),
                buses, branches, devices, nodes, pipes, (ground,) * T)


@pytest.fixture(scope="session")
def case33():
    return bundled_case("case33_30")


@pytest.fixture(scope="session")
def case5():
    return bundled_case("case5_4")


@pytest.fixture
def mini():
    return mini_dhs_case()


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[i]
        terminalreporter.write_line(f"criterion {i}: {'PASS' if ok else 'FAIL'}  {detail}")
