"""Single-pipe thermal simulators: node method (reference) and STD scheme."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .case import PhysicalConstants, PipeSpec, TimeGrid


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class DelayInfo:
    t_st: int
    t_ed: int
    m_st: float
    m_ed: float


def delays(flow_hist: np.ndarray, t: int, mass: float, dt: float) -> DelayInfo:
    """Arrival/leaving delays at index ``t`` of a flow history (kg/s).

    ``t_st`` is the smallest zeta with sum_{tau=t-zeta}^{t} m dt > M and
    ``t_ed`` the smallest with the sum exceeding M + m_t dt.
    """
    target_st = mass
    target_ed = mass + flow_hist[t] * dt
    acc = 0.0
    t_st = t_ed = None
    m_st = 0.0
    for zeta in range(t + 1):
        acc += flow_hist[t - zeta] * dt
        if t_st is None and acc > target_st:
            t_st, m_st = zeta, acc
        if acc > target_ed:
            t_ed = zeta
            break
    if t_st is None or t_ed is None:
        raise SimulationError(f"insufficient history at step {t}")
    if t_ed > t_st:
        m_ed = float(np.sum(flow_hist[t - t_ed + 1:t + 1]) * dt)
    else:
        m_ed = m_st
    return DelayInfo(t_st, t_ed, m_st, m_ed)


def _padding(flow: np.ndarray, mass: float, dt: float) -> int:
    return int(math.ceil((mass + flow.max() * dt) / (flow.min() * dt))) + 2


def simulate_node_method(pipe: PipeSpec, inlet, flow, ground, grid: TimeGrid,
                         constants: PhysicalConstants | None = None,
                         pad: bool = True, return_delays: bool = False):
    """Outlet temperature series by the node method.

    Pre-horizon history is padded with the t = 0 inlet temperature and flow.
    """
    c = constants or PhysicalConstants()
    inlet = np.asarray(inlet, dtype=float)
    flow = np.asarray(flow, dtype=float)
    ground = np.broadcast_to(np.asarray(ground, dtype=float), inlet.shape)
    if np.any(flow <= 0):
        raise SimulationError("node method needs strictly positive flow")
    dt = grid.step_length
    M = pipe.water_mass(c.water_density)
    P = _padding(flow, M, dt) if pad else 0
    m_h = np.concatenate([np.full(P, flow[0]), flow])
    T_h = np.concatenate([np.full(P, inlet[0]), inlet])
    decay = pipe.conductivity * dt / (pipe.area * c.water_density * c.specific_heat)
    out = np.empty_like(inlet)
    info = []
    for t in range(inlet.size):
        i = t + P
        d = delays(m_h, i, M, dt)
        inner = slice(i - d.t_ed + 1, i - d.t_st)
        delta = float(np.sum(m_h[inner] * dt * T_h[inner])) if d.t_ed - d.t_st >= 2 else 0.0
        mdt = m_h[i] * dt
        lossfree = ((d.m_st - M) * T_h[i - d.t_st] + delta
                    + (mdt + M - d.m_ed) * T_h[i - d.t_ed]) / mdt
        expo = d.t_st + 0.5 + (d.m_ed - d.m_st) / (m_h[i - d.t_st] * dt)
        out[t] = ground[t] + (lossfree - ground[t]) * math.exp(-decay * expo)
        info.append(d)
    return (out, info) if return_delays else out


def std_step(t_in: float, m: float, prev_avg: float, ground: float, pipe: PipeSpec,
             dt: float, c: PhysicalConstants) -> float:
    """Solve the discrete balance of one step for the outlet temperature."""
    M = pipe.water_mass(c.water_density)
    k = pipe.conductivity / (pipe.area * c.water_density * c.specific_heat)
    pivot = 1.0 / (2 * dt) + m / M + k / 2
    if not pivot > 0:
        raise SimulationError(f"degenerate outlet coefficient {pivot}")
    rhs = prev_avg / dt + k * ground + t_in * (m / M - 1.0 / (2 * dt) - k / 2)
    return rhs / pivot


def simulate_std(pipe: PipeSpec, inlet, flow, ground, grid: TimeGrid, t_init: float,
                 constants: PhysicalConstants | None = None) -> np.ndarray:
    """Outlet temperature series of the first-order upwind (STD) scheme."""
    c = constants or PhysicalConstants()
    inlet = np.asarray(inlet, dtype=float)
    flow = np.asarray(flow, dtype=float)
    ground = np.broadcast_to(np.asarray(ground, dtype=float), inlet.shape)
    if np.any(flow < 0):
        raise SimulationError("STD scheme needs nonnegative flow")
    out = np.empty_like(inlet)
    avg = float(t_init)
    for t in range(inlet.size):
        out[t] = std_step(inlet[t], flow[t], avg, ground[t], pipe, grid.step_length, c)
        avg = 0.5 * (inlet[t] + out[t])
    return out


def step_profile(T: int, low: float = 70.0, high: float = 90.0,
                 up: int | None = None, down: int | None = None) -> np.ndarray:
    """Inlet profile: ``low``, a step to ``high`` at ``up`` and back at ``down``."""
    up = T // 4 if up is None else up
    down = (5 * T) // 8 if down is None else down
    x = np.full(T, low)
    x[up:down] = high
    return x


def onset(series: np.ndarray, start: int, frac: float = 0.5) -> int:
    """First index >= start where the series covers ``frac`` of its rise after start."""
    base = series[start - 1] if start > 0 else series[0]
    top = series[start:].max()
    level = base + frac * (top - base)
    hits = np.flatnonzero(series[start:] >= level)
    return int(start + hits[0]) if hits.size else len(series)


@dataclass
class ValidationRun:
    flow: float
    inlet: np.ndarray
    node_method: np.ndarray
    std: np.ndarray

    @property
    def rel_err(self) -> np.ndarray:
        return np.abs(self.std - self.node_method) / np.abs(self.node_method)

    @property
    def mean_rel_err(self) -> float:
        return float(self.rel_err.mean())


def validate_pipe(pipe: PipeSpec, flow: float, grid: TimeGrid, ground: float = 10.0,
                  constants: PhysicalConstants | None = None, low: float = 70.0,
                  high: float = 90.0) -> ValidationRun:
    """STD vs node method on a step inlet at constant flow."""
    c = constants or PhysicalConstants()
    T = grid.num_periods
    inlet = step_profile(T, low, high)
    m = np.full(T, float(flow))
    nm = simulate_node_method(pipe, inlet, m, ground, grid, c)
    # initial pipe state consistent with the t = 0 regime
    std0 = simulate_std(pipe, np.full(50, low), np.full(50, flow), ground, grid, low, c)
    t_init = 0.5 * (low + std0[-1])
    sd = simulate_std(pipe, inlet, m, ground, grid, t_init, c)
    return ValidationRun(float(flow), inlet, nm, sd)
