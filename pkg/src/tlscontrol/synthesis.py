"""Reverse-engineered control field for prescribed P(t) and Phi(t).

The field is evaluated in quadrature form,

    eps(t) = (2/mu) * (A sin(theta) + B cos(theta)),   theta = omega0 t + Phi,

with A = P' / (2 sqrt(P(1-P))) and B = Phi' sqrt(P(1-P)) / (1 - 2P). This is
the same field as V0 sin(theta + Lambda) with a signed envelope V0 and phase
Lambda, but stays regular where P' = 0. (V0, Lambda) are reported for
diagnostics and for the complex RWA envelope.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import SystemParams
from .trajectories import ConstantPhase, ConstantPopulation, Trajectory, TrajectorySample

EXTREMUM_EPS = 1e-12
HALF_GUARD = 1e-6
HALF_WARNING_BAND = 0.05
FIELD_OFF = 1e-24


class SingularityError(ValueError):
    """The trajectory pair makes the field formula singular at ``time``."""

    def __init__(self, message, time=float("nan")):
        super().__init__(message)
        self.time = float(time)


class NearHalfPopulationWarning(UserWarning):
    pass


class QuadratureComponents(NamedTuple):
    A: float | np.ndarray
    B: float | np.ndarray
    theta: float | np.ndarray


@dataclass(frozen=True)
class FieldSample:
    """Synthesized field at one instant or, with array fields, along a grid.

    ``envelope`` is the signed V0, ``lam`` the phase Lambda, ``phase`` the
    prescribed Phi; ``detuning`` is Phi' + Lambda' in a.u. of angular frequency.
    """

    t: float | np.ndarray
    epsilon: float | np.ndarray
    envelope: float | np.ndarray
    lam: float | np.ndarray
    phase: float | np.ndarray
    detuning: float | np.ndarray
    omega0: float

    @property
    def total_phase(self):
        return self.omega0 * self.t + self.phase + self.lam


def _first(mask, t):
    mask = np.atleast_1d(mask)
    ts = np.broadcast_to(np.atleast_1d(np.asarray(t, float)), mask.shape)
    return float(ts[np.flatnonzero(mask)[0]])


def _scalarize(x, scalar):
    return float(x) if scalar else x


def _rates(p: TrajectorySample, phi: TrajectorySample, t):
    P, dP = np.asarray(p.value, float), np.asarray(p.d1, float)
    dphi, d2phi = np.asarray(phi.d1, float), np.asarray(phi.d2, float)

    at_edge = (P <= EXTREMUM_EPS) | (P >= 1.0 - EXTREMUM_EPS)
    if np.any(at_edge & (dP != 0)):
        raise SingularityError(
            "population at an extremum (0 or 1) with nonzero slope",
            _first(at_edge & (dP != 0), t),
        )
    s = np.sqrt(np.clip(P * (1.0 - P), 0.0, None))
    D = 1.0 - 2.0 * P
    with np.errstate(divide="ignore", invalid="ignore"):
        A = np.where(at_edge, 0.0, dP / (2.0 * s))
        near = np.abs(D) < HALF_GUARD
        limit = np.where(dP != 0, d2phi * s / (-2.0 * dP), 0.0)
        # inside the band Phi' may only be as large as its linear drift allows
        allowed = 1e-14 + 2.0 * np.abs(np.where(dP != 0, d2phi * D / (2.0 * dP), 0.0))
        bad = near & (np.abs(dphi) > allowed)
        if np.any(bad):
            raise SingularityError(
                "relative phase changes while populations are equal (P = 1/2 with nonzero Phi')",
                _first(bad, t),
            )
        B = np.where(np.abs(dphi) < 1e-14, 0.0, dphi * s / D)
        B = np.where(near, limit, B)
    return A, B


def quadrature_at(p: TrajectorySample, phi: TrajectorySample, t, system: SystemParams) -> QuadratureComponents:
    """A, B and theta for population/phase samples at time(s) ``t``.

    Raises SingularityError where P sits at 0 or 1 with P' != 0, or where
    P = 1/2 (within ``HALF_GUARD`` on 1 - 2P) while Phi' is not vanishing
    along with 1 - 2P. Inside that band B takes its limit
    Phi'' sqrt(P(1-P)) / (-2 P').
    """
    scalar = np.ndim(t) == 0 and np.ndim(p.value) == 0
    A, B = _rates(p, phi, t)
    theta = system.omega0 * np.asarray(t, float) + np.asarray(phi.value, float)
    return QuadratureComponents(_scalarize(A, scalar), _scalarize(B, scalar), _scalarize(theta, scalar))


def envelope_and_phase(q: QuadratureComponents, sign_hint, mu: float):
    """Signed envelope V0 and phase Lambda with V0 sin(th + Lambda) = (2/mu)(A sin th + B cos th).

    ``sign_hint`` is P' (only its sign matters); where it is zero the
    envelope is taken positive.
    """
    A, B = np.asarray(q.A, float), np.asarray(q.B, float)
    sign = np.where(np.asarray(sign_hint) < 0, -1.0, 1.0)
    v0 = sign * (2.0 / mu) * np.hypot(A, B)
    lam = np.arctan2(B * sign, A * sign)
    if np.ndim(v0) == 0:
        return float(v0), float(lam)
    return v0, lam


def _lambda_rate(p: TrajectorySample, phi: TrajectorySample, A, B):
    P, dP, d2P = (np.asarray(x, float) for x in p)
    dphi, d2phi = np.asarray(phi.d1, float), np.asarray(phi.d2, float)
    s = np.sqrt(np.clip(P * (1.0 - P), 0.0, None))
    D = 1.0 - 2.0 * P
    with np.errstate(divide="ignore", invalid="ignore"):
        ds = dP * D / (2.0 * s)
        dA = d2P / (2.0 * s) - dP * dP * D / (4.0 * s**3)
        dB = (d2phi * s + dphi * ds) / D + 2.0 * dP * dphi * s / D**2
        r2 = A * A + B * B
        return np.where(r2 < FIELD_OFF, 0.0, (A * dB - B * dA) / r2)


def detuning_at(population: Trajectory, phase: Trajectory, t):
    """Instantaneous detuning Phi' + Lambda' (a.u. angular frequency).

    Where the field vanishes Lambda is held constant, so the detuning is Phi'.
    Within the 1/2 guard band the rate is the average of the values just
    outside the band on either side.
    """
    t_arr = np.atleast_1d(np.asarray(t, float))
    p, phi = population.evaluate(t_arr), phase.evaluate(t_arr)
    A, B = _rates(p, phi, t_arr)
    rate = np.asarray(phi.d1, float) + _lambda_rate(p, phi, A, B)
    near = np.abs(1.0 - 2.0 * np.asarray(p.value)) < HALF_GUARD
    if np.any(near):
        for k in np.flatnonzero(near):
            dP = abs(p.d1[k])
            delta = 4.0 * HALF_GUARD / dP if dP > 0 else 1e-3
            left = detuning_at(population, phase, t_arr[k] - delta)
            right = detuning_at(population, phase, t_arr[k] + delta)
            rate[k] = 0.5 * (left + right)
    return float(rate[0]) if np.ndim(t) == 0 else rate


def field_at(system: SystemParams, population: Trajectory, phase: Trajectory, t) -> FieldSample:
    """Control field that drives the system along (P, Phi).

    For a 1-D array of increasing times Lambda is unwrapped along the series.
    """
    p, phi = population.evaluate(t), phase.evaluate(t)
    q = quadrature_at(p, phi, t, system)
    eps = (2.0 / system.mu) * (q.A * np.sin(q.theta) + q.B * np.cos(q.theta))
    v0, lam = envelope_and_phase(q, p.d1, system.mu)
    if np.ndim(lam) == 1 and len(lam) > 1:
        lam = np.unwrap(lam)
    det = detuning_at(population, phase, t)
    return FieldSample(
        t=t if np.ndim(t) == 0 else np.asarray(t, float),
        epsilon=_scalarize(eps, np.ndim(t) == 0),
        envelope=v0,
        lam=lam,
        phase=phi.value,
        detuning=det,
        omega0=system.omega0,
    )


def field_constant_phase(system: SystemParams, population: Trajectory, phi0: float, t) -> FieldSample:
    """Field keeping the relative phase fixed at ``phi0`` while P follows ``population``."""
    p = population.evaluate(t)
    P = np.asarray(p.value, float)
    if np.any((P <= 0.0) | (P >= 1.0)):
        raise SingularityError("population at 0 or 1", _first((P <= 0.0) | (P >= 1.0), t))
    v0 = np.asarray(p.d1) / (system.mu * np.sqrt(P * (1.0 - P)))
    eps = v0 * np.sin(system.omega0 * np.asarray(t, float) + phi0)
    scalar = np.ndim(t) == 0
    zeros = 0.0 if scalar else np.zeros_like(P)
    return FieldSample(
        t=t if scalar else np.asarray(t, float),
        epsilon=_scalarize(eps, scalar),
        envelope=_scalarize(v0, scalar),
        lam=zeros,
        phase=phi0 if scalar else np.full_like(P, phi0),
        detuning=zeros,
        omega0=system.omega0,
    )


def field_constant_population(system: SystemParams, p0: float, phase: Trajectory, t) -> FieldSample:
    """Field changing only the relative phase while the ground population stays at ``p0``."""
    if not 0.0 < p0 < 1.0:
        raise SingularityError(f"constant population must lie in (0, 1), got {p0}")
    if p0 == 0.5:
        raise SingularityError(
            "the relative phase cannot change while populations are held equal (P0 = 1/2)"
        )
    if abs(p0 - 0.5) < HALF_WARNING_BAND:
        warnings.warn(
            f"P0={p0} is within {HALF_WARNING_BAND} of 1/2; the field amplitude blows up there",
            NearHalfPopulationWarning,
            stacklevel=2,
        )
    phi = phase.evaluate(t)
    amp = (2.0 / system.mu) * np.asarray(phi.d1, float) * np.sqrt(p0 * (1.0 - p0)) / (1.0 - 2.0 * p0)
    theta = system.omega0 * np.asarray(t, float) + np.asarray(phi.value, float)
    eps = amp * np.cos(theta)
    scalar = np.ndim(t) == 0
    lam = np.where(amp > 0, np.pi / 2, np.where(amp < 0, -np.pi / 2, 0.0))
    return FieldSample(
        t=t if scalar else np.asarray(t, float),
        epsilon=_scalarize(eps, scalar),
        envelope=_scalarize(np.abs(amp), scalar),
        lam=_scalarize(lam, scalar),
        phase=phi.value,
        detuning=phi.d1,
        omega0=system.omega0,
    )


def synthesize(system, population, phase, t, mode="general") -> FieldSample:
    """Dispatch to the general or a limiting-case synthesizer."""
    if mode == "general":
        return field_at(system, population, phase, t)
    if mode == "constant_phase":
        if not isinstance(phase, ConstantPhase):
            raise ValueError("constant_phase mode needs a constant phase trajectory")
        return field_constant_phase(system, population, phase.phi0, t)
    if mode == "constant_population":
        if not isinstance(population, ConstantPopulation):
            raise ValueError("constant_population mode needs a constant population trajectory")
        return field_constant_population(system, population.p0, phase, t)
    raise ValueError(f"unknown synthesis mode {mode!r}")


def rwa_envelope(fs: FieldSample):
    """Complex envelope e(t) with e e^{-i w0 t} + c.c. = V0 sin(w0 t + Phi + Lambda)."""
    env = 0.5j * np.asarray(fs.envelope) * np.exp(-1j * (np.asarray(fs.phase) + np.asarray(fs.lam)))
    return complex(env) if env.ndim == 0 else env
