"""Interaction-picture propagation of the two-level amplitudes (C_g, C_e).

Two equations of motion are available: the rotating-wave equations driven
by a complex envelope e(t) (carrier at resonance), and the full equations
driven by the real field eps(t) with counter-rotating terms kept. Both are
stepped with classical fixed-step RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .core import SystemParams, TimeGrid

PHASE_FLOOR = 1e-12


class QuantumState(NamedTuple):
    cg: complex
    ce: complex

    @property
    def norm(self) -> float:
        return abs(self.cg) ** 2 + abs(self.ce) ** 2


class StepSizeError(ValueError):
    """Integrator step too coarse for the requested mode."""


def init_state(p_i: float, phi_i: float) -> QuantumState:
    """State with |C_g|^2 = p_i and relative phase phi_i, gauge arg(C_e) = 0."""
    if not 0.0 <= p_i <= 1.0:
        raise ValueError(f"initial population must lie in [0, 1], got {p_i}")
    return QuantumState(math.sqrt(p_i) * complex(math.cos(phi_i), math.sin(phi_i)), complex(math.sqrt(1.0 - p_i)))


def rwa_derivative(s: QuantumState, t: float, env: complex, system: SystemParams) -> QuantumState:
    mu = system.mu
    return QuantumState(1j * mu * env.conjugate() * s.ce, 1j * mu * env * s.cg)


def full_derivative(s: QuantumState, t: float, eps: float, system: SystemParams) -> QuantumState:
    rot = complex(math.cos(system.omega0 * t), math.sin(system.omega0 * t))
    g = 1j * system.mu * eps
    return QuantumState(g * s.ce * rot.conjugate(), g * s.cg * rot)


def relative_phase_series(cg: np.ndarray, ce: np.ndarray) -> np.ndarray:
    """arg(C_g) - arg(C_e), continued across 2*pi jumps; NaN where undefined."""
    phase = np.angle(cg) - np.angle(ce)
    defined = (np.abs(cg) > PHASE_FLOOR) & (np.abs(ce) > PHASE_FLOOR)
    out = np.full(phase.shape, np.nan)
    if defined.any():
        out[defined] = np.unwrap(phase[defined])
    return out


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    cg: np.ndarray
    ce: np.ndarray
    mode: str = "rwa"
    populations_g: np.ndarray = field(init=False, repr=False)
    relative_phase: np.ndarray = field(init=False, repr=False)
    norm_residual: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (len(self.times) == len(self.cg) == len(self.ce)):
            raise ValueError("times and amplitudes must share length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        pg = np.abs(self.cg) ** 2
        object.__setattr__(self, "populations_g", pg)
        object.__setattr__(self, "relative_phase", relative_phase_series(self.cg, self.ce))
        object.__setattr__(self, "norm_residual", np.abs(pg + np.abs(self.ce) ** 2 - 1.0))

    @property
    def states(self) -> list[QuantumState]:
        return [QuantumState(complex(a), complex(b)) for a, b in zip(self.cg, self.ce)]

    @property
    def final(self) -> QuantumState:
        return QuantumState(complex(self.cg[-1]), complex(self.ce[-1]))

    def subsample(self, every: int) -> TimeSeries:
        return TimeSeries(self.times[::every], self.cg[::every], self.ce[::every], self.mode)


def phase_relation_residual(series: TimeSeries) -> np.ndarray:
    """phi_e' |C_e|^2 - phi_g' |C_g|^2 by central differences.

    Vanishes for any evolution driven by a real field under the RWA.
    """
    phg = np.unwrap(np.angle(series.cg))
    phe = np.unwrap(np.angle(series.ce))
    dg = np.gradient(phg, series.times)
    de = np.gradient(phe, series.times)
    return de * np.abs(series.ce) ** 2 - dg * np.abs(series.cg) ** 2


def rk4(
    rhs: Callable[[complex, complex, complex], tuple[complex, complex]],
    drive: np.ndarray,
    s0: QuantumState,
    h: float,
    n_steps: int,
):
    """Fixed-step RK4 for the 2-component linear system.

    ``drive`` holds the coupling sampled at t0 + k h / 2, k = 0..2 n_steps, so
    node values sit at even and midpoints at odd indices. ``rhs(cg, ce, d)``
    returns the derivative for coupling value ``d``.
    """
    cg = np.empty(n_steps + 1, dtype=complex)
    ce = np.empty(n_steps + 1, dtype=complex)
    a, b = complex(s0.cg), complex(s0.ce)
    cg[0], ce[0] = a, b
    h2, h6 = 0.5 * h, h / 6.0
    for k in range(n_steps):
        d0, dm, d1 = drive[2 * k], drive[2 * k + 1], drive[2 * k + 2]
        k1a, k1b = rhs(a, b, d0)
        k2a, k2b = rhs(a + h2 * k1a, b + h2 * k1b, dm)
        k3a, k3b = rhs(a + h2 * k2a, b + h2 * k2b, dm)
        k4a, k4b = rhs(a + h * k3a, b + h * k3b, d1)
        a = a + h6 * (k1a + 2.0 * (k2a + k3a) + k4a)
        b = b + h6 * (k1b + 2.0 * (k2b + k3b) + k4b)
        cg[k + 1], ce[k + 1] = a, b
    return cg, ce


def required_steps(system: SystemParams, grid: TimeGrid, mode: str) -> int:
    """Smallest step count satisfying the step rule of ``mode``."""
    span = grid.tf - grid.t0
    if mode == "full":
        return math.ceil(span / (system.carrier_period / 50.0) - 1e-9)
    if mode == "rwa":
        return 200
    raise ValueError(f"unknown mode {mode!r}")


def substage_times(grid: TimeGrid) -> np.ndarray:
    ts = grid.t0 + 0.5 * grid.step * np.arange(2 * grid.n_steps + 1)
    ts[-1] = grid.tf
    return ts


def integrate(
    system: SystemParams,
    s0: QuantumState,
    grid: TimeGrid,
    *,
    envelope: Callable | None = None,
    field: Callable | None = None,
    check_step: bool = True,
) -> TimeSeries:
    """Propagate ``s0`` over ``grid`` under either drive.

    Exactly one of ``envelope`` (complex RWA envelope, vectorized in t) or
    ``field`` (real field in a.u., vectorized in t) must be given. The drive
    is sampled analytically at every RK4 stage time.
    """
    if (envelope is None) == (field is None):
        raise ValueError("give exactly one of envelope= or field=")
    mode = "rwa" if envelope is not None else "full"
    if check_step:
        need = required_steps(system, grid, mode)
        if grid.n_steps < need:
            raise StepSizeError(
                f"{mode} integration over [{grid.t0:g}, {grid.tf:g}] needs at least {need} steps "
                f"(step <= {(grid.tf - grid.t0) / need:.6g} a.u.), got {grid.n_steps}"
            )
    ts = substage_times(grid)
    mu = system.mu
    if mode == "rwa":
        drive = np.asarray(envelope(ts), dtype=complex) * mu

        def rhs(a, b, d):
            return 1j * d.conjugate() * b, 1j * d * a

    else:
        # couplings i mu eps e^{-i w0 t} for C_g and its conjugate partner for C_e
        drive = 1j * mu * np.asarray(field(ts), dtype=float) * np.exp(-1j * system.omega0 * ts)

        def rhs(a, b, d):
            return d * b, -d.conjugate() * a

    cg, ce = rk4(rhs, drive.tolist(), s0, grid.step, grid.n_steps)
    return TimeSeries(grid.times, cg, ce, mode)
