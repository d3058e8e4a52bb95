"""Prescribed population P(t) and relative-phase Phi(t) trajectories.

Every family returns its value together with analytic first and second time
derivatives; the field synthesis needs the first derivatives and the
detuning needs the second ones. All times are in atomic units and all
families evaluate elementwise on numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect

from .core import SystemParams, TimeGrid, rate_fs_to_au


class TrajectorySample(NamedTuple):
    value: float | np.ndarray
    d1: float | np.ndarray
    d2: float | np.ndarray


class TrajectoryError(ValueError):
    """Invalid trajectory parameters."""


def _sample(value, d1, d2, t):
    if np.ndim(t) == 0:
        return TrajectorySample(float(value), float(d1), float(d2))
    shape = np.shape(t)
    return TrajectorySample(
        np.broadcast_to(value, shape).astype(float),
        np.broadcast_to(d1, shape).astype(float),
        np.broadcast_to(d2, shape).astype(float),
    )


def _check_probability(name, p):
    if not (0.0 <= p <= 1.0):
        raise TrajectoryError(f"{name} must lie in [0, 1], got {p}")


def _sech(x):
    # 1/cosh overflows to 0 cleanly for large |x|
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(x)


class Trajectory:
    kind = "abstract"

    def evaluate(self, t) -> TrajectorySample:
        raise NotImplementedError

    def __call__(self, t):
        return self.evaluate(t).value


# ---------------------------------------------------------------------------
# population families


@dataclass(frozen=True)
class ConstantPopulation(Trajectory):
    p0: float
    kind = "constant"

    def __post_init__(self):
        _check_probability("p0", self.p0)

    def evaluate(self, t):
        return _sample(self.p0, 0.0, 0.0, t)


@dataclass(frozen=True)
class LinearPopulation(Trajectory):
    p_i: float
    p_f: float
    t0: float
    tf: float
    kind = "linear"

    def __post_init__(self):
        _check_probability("p_i", self.p_i)
        _check_probability("p_f", self.p_f)
        if not self.tf > self.t0:
            raise TrajectoryError("need tf > t0")

    @property
    def slope(self) -> float:
        return (self.p_f - self.p_i) / (self.tf - self.t0)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        value = self.p_i + (self.p_f - self.p_i) * ((t - self.t0) / (self.tf - self.t0))
        return _sample(value, self.slope, 0.0, t)


@dataclass(frozen=True)
class QuadraticPopulation(Trajectory):
    """Parabola through (t0, p_i), (t_half, 1/2) and (tf, p_f)."""

    p_i: float
    p_f: float
    t_half: float
    t0: float
    tf: float
    kind = "quadratic_through_half"
    _c1: float = field(init=False, repr=False)
    _c2: float = field(init=False, repr=False)

    def __post_init__(self):
        _check_probability("p_i", self.p_i)
        _check_probability("p_f", self.p_f)
        if not self.t0 < self.t_half < self.tf:
            raise TrajectoryError("t_half must lie strictly inside (t0, tf)")
        # Newton divided differences in tau = t - t0
        tau1, tau2 = self.t_half - self.t0, self.tf - self.t0
        c1 = (0.5 - self.p_i) / tau1
        c2 = ((self.p_f - 0.5) / (tau2 - tau1) - c1) / tau2
        object.__setattr__(self, "_c1", c1)
        object.__setattr__(self, "_c2", c2)

    def evaluate(self, t):
        tau = np.asarray(t, dtype=float) - self.t0
        tau1 = self.t_half - self.t0
        value = self.p_i + self._c1 * tau + self._c2 * tau * (tau - tau1)
        d1 = self._c1 + self._c2 * (2.0 * tau - tau1)
        return _sample(value, d1, 2.0 * self._c2, t)


@dataclass(frozen=True)
class TanhPopulation(Trajectory):
    """P(t) = A tanh(alpha t + beta) + B, crossing 1/2 at ``t_half``.

    Approaches p_i and p_f only asymptotically.
    """

    p_i: float
    p_f: float
    alpha: float
    t_half: float
    kind = "tanh"

    def __post_init__(self):
        _check_probability("p_i", self.p_i)
        _check_probability("p_f", self.p_f)
        if self.p_i == self.p_f:
            raise TrajectoryError("tanh population needs p_i != p_f")
        if not self.alpha > 0:
            raise TrajectoryError("alpha must be positive")
        if not abs(self.gamma) < 1:
            raise TrajectoryError(
                f"1/2 is not strictly between p_i={self.p_i} and p_f={self.p_f} (|gamma| >= 1)"
            )

    @property
    def amplitude(self) -> float:
        return 0.5 * (self.p_f - self.p_i)

    @property
    def offset(self) -> float:
        return 0.5 * (self.p_f + self.p_i)

    @property
    def gamma(self) -> float:
        return (0.5 - self.offset) / self.amplitude

    @property
    def beta(self) -> float:
        g = self.gamma
        return 0.5 * math.log((1.0 + g) / (1.0 - g)) - self.alpha * self.t_half

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        a, k = self.amplitude, self.alpha
        # alpha (t - t_half) + atanh(gamma) == alpha t + beta, without cancellation
        u = k * (t - self.t_half) + math.atanh(self.gamma)
        th = np.tanh(u)
        s2 = _sech(u) ** 2
        return _sample(a * th + self.offset, a * k * s2, -2.0 * a * k * k * s2 * th, t)

    def endpoint_residual(self, t) -> float:
        """Bound |P(t) - target| at an asymptotic end, computed from the tanh tail."""
        u = self.alpha * t + self.beta
        return abs(self.amplitude) * (1.0 - math.tanh(abs(u)))


@dataclass(frozen=True)
class SechPopulation(Trajectory):
    """P(t) = (p_max - p_ends) sech(xi (t - t_peak)) + p_ends."""

    p_ends: float
    p_max: float
    xi: float
    t_peak: float
    kind = "sech"

    def __post_init__(self):
        _check_probability("p_ends", self.p_ends)
        if not 0.0 < self.p_max < 1.0:
            raise TrajectoryError("p_max must lie in (0, 1)")
        if self.p_max == 0.5:
            raise TrajectoryError("p_max = 1/2 is not allowed")
        if not self.xi > 0:
            raise TrajectoryError("xi must be positive")

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        g, k = self.p_max - self.p_ends, self.xi
        x = k * (t - self.t_peak)
        s, th = _sech(x), np.tanh(x)
        return _sample(g * s + self.p_ends, -g * k * s * th, g * k * k * s * (1.0 - 2.0 * s * s), t)


# ---------------------------------------------------------------------------
# relative-phase families


@dataclass(frozen=True)
class ConstantPhase(Trajectory):
    phi0: float
    kind = "constant"

    def evaluate(self, t):
        return _sample(self.phi0, 0.0, 0.0, t)


@dataclass(frozen=True)
class LinearPhase(Trajectory):
    phi_i: float
    phi_f: float
    t0: float
    tf: float
    kind = "linear"

    def __post_init__(self):
        if not self.tf > self.t0:
            raise TrajectoryError("need tf > t0")

    @property
    def slope(self) -> float:
        return (self.phi_f - self.phi_i) / (self.tf - self.t0)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        value = self.phi_i + (self.phi_f - self.phi_i) * ((t - self.t0) / (self.tf - self.t0))
        return _sample(value, self.slope, 0.0, t)


@dataclass(frozen=True)
class QuadraticVertexPhase(Trajectory):
    """Phi(t) = a (t - t_vertex)^2 + c; use :func:`build_quadratic_vertex`."""

    a: float
    c: float
    t_vertex: float
    kind = "quadratic_vertex"

    def evaluate(self, t):
        dt = np.asarray(t, dtype=float) - self.t_vertex
        return _sample(self.a * dt * dt + self.c, 2.0 * self.a * dt, 2.0 * self.a, t)


def build_quadratic_vertex(phi_i, phi_f, t_vertex, t0, tf) -> QuadraticVertexPhase:
    """Quadratic phase with Phi(t0)=phi_i, Phi(tf)=phi_f and zero slope at t_vertex.

    Impossible when the vertex sits exactly mid-interval and phi_i != phi_f.
    """
    if not t0 < t_vertex < tf:
        raise TrajectoryError("vertex time must lie strictly inside (t0, tf)")
    if phi_i == phi_f:
        return QuadraticVertexPhase(0.0, float(phi_i), float(t_vertex))
    right, left = (tf - t_vertex) ** 2, (t0 - t_vertex) ** 2
    denom = right - left
    if abs(denom) <= 1e-12 * max(right, left):
        raise TrajectoryError(
            "a quadratic phase with its vertex at the midpoint of [t0, tf] "
            "cannot join different initial and final phases"
        )
    a = (phi_f - phi_i) / denom
    return QuadraticVertexPhase(a, phi_i - a * left, float(t_vertex))


@dataclass(frozen=True)
class SechPairPhase(Trajectory):
    """Two sech branches glued at ``t_vertex`` where Phi reaches ``phi_max``.

    chi1/chi2 are fixed by Phi(t0)=phi_i and Phi(tf)=phi_f; the right-hand
    width eta2 = eta1 sqrt(chi1/chi2) makes the second derivative continuous.
    Because eta2 enters the right boundary condition, chi2 and eta2 are
    solved jointly by fixed-point iteration.
    """

    phi_i: float
    phi_f: float
    phi_max: float
    eta1: float
    t_vertex: float
    t0: float
    tf: float
    kind = "sech_pair"
    chi1: float = field(init=False)
    chi2: float = field(init=False)
    eta2: float = field(init=False)

    def __post_init__(self):
        if not self.t0 < self.t_vertex < self.tf:
            raise TrajectoryError("vertex time must lie strictly inside (t0, tf)")
        if not self.eta1 > 0:
            raise TrajectoryError("eta1 must be positive")
        d_left, d_right = self.phi_i - self.phi_max, self.phi_f - self.phi_max
        if d_left == 0 or d_right == 0 or (d_left > 0) != (d_right > 0):
            raise TrajectoryError(
                "phi_max must lie strictly above (or below) both phi_i and phi_f"
            )
        chi1 = d_left / (_sech(self.eta1 * (self.t0 - self.t_vertex)) - 1.0)
        chi2 = d_right / (_sech(self.eta1 * (self.tf - self.t_vertex)) - 1.0)
        for _ in range(200):
            eta2 = self.eta1 * math.sqrt(chi1 / chi2)
            new = d_right / (_sech(eta2 * (self.tf - self.t_vertex)) - 1.0)
            if abs(new - chi2) <= 1e-15 * abs(chi2):
                chi2 = new
                break
            chi2 = new
        else:  # pragma: no cover - contraction factor is ~sech, tiny for sane inputs
            raise TrajectoryError("sech pair coefficients did not converge")
        object.__setattr__(self, "chi1", chi1)
        object.__setattr__(self, "chi2", chi2)
        object.__setattr__(self, "eta2", self.eta1 * math.sqrt(chi1 / chi2))

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        left = t < self.t_vertex
        chi = np.where(left, self.chi1, self.chi2)
        eta = np.where(left, self.eta1, self.eta2)
        x = eta * (t - self.t_vertex)
        s, th = _sech(x), np.tanh(x)
        value = chi * (s - 1.0) + self.phi_max
        d1 = -chi * eta * s * th
        d2 = chi * eta * eta * s * (1.0 - 2.0 * s * s)
        return _sample(value, d1, d2, t)


@dataclass(frozen=True)
class TanhPhase(Trajectory):
    """Phi(t) = G tanh(chi (t - t_center)) + F joining phi_i to phi_f asymptotically."""

    phi_i: float
    phi_f: float
    chi: float
    t_center: float
    kind = "tanh"

    def __post_init__(self):
        if not self.chi > 0:
            raise TrajectoryError("chi must be positive")

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        g, f, k = 0.5 * (self.phi_f - self.phi_i), 0.5 * (self.phi_f + self.phi_i), self.chi
        x = k * (t - self.t_center)
        th, s2 = np.tanh(x), _sech(x) ** 2
        return _sample(g * th + f, g * k * s2, -2.0 * g * k * k * s2 * th, t)


def eval_population(traj: Trajectory, t) -> TrajectorySample:
    return traj.evaluate(t)


def eval_phase(traj: Trajectory, t) -> TrajectorySample:
    return traj.evaluate(t)


def find_half_crossings(traj: Trajectory, grid: TimeGrid, tol: float = 1e-6) -> list[float]:
    """Times where P(t) = 1/2, bracketed on the grid and refined by bisection.

    Grid nodes where P is exactly 1/2 are reported as they are.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ts = grid.times
    f = traj.evaluate(ts).value - 0.5

    def g(t):
        return traj.evaluate(t).value - 0.5

    roots = []
    for k in range(len(ts)):
        if f[k] == 0.0:
            roots.append(float(ts[k]))
        elif k + 1 < len(ts) and f[k] * f[k + 1] < 0:
            roots.append(float(bisect(g, ts[k], ts[k + 1], xtol=tol)))
    return roots


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationTolerances:
    pop: float = 1e-6
    half: float = 1e-3
    rate: float = rate_fs_to_au(1e-6)
    phase_rate: float = rate_fs_to_au(1e-4)
    crossing: float = 1e-6


@dataclass(frozen=True)
class Violation:
    constraint: str
    time: float
    magnitude: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def accepted(self) -> bool:
        return not self.violations

    def ids(self) -> list[str]:
        return [v.constraint for v in self.violations]

    def __str__(self):
        if self.accepted:
            return "trajectory pair accepted"
        return "\n".join(
            f"{v.constraint} at t={v.time:.6g} a.u.: {v.message} (magnitude {v.magnitude:.3e})"
            for v in self.violations
        )


def _worst(mask, score):
    return int(np.argmax(np.where(mask, score, -np.inf)))


def validate(
    population: Trajectory,
    phase: Trajectory,
    grid: TimeGrid,
    tols: ValidationTolerances | None = None,
    system: SystemParams | None = None,
) -> ValidationReport:
    """Check a (P, Phi) pair against the constraints that make the field well defined.

    C1  0 <= P <= 1 (norm conservation)
    C2  dP/dt = 0 where P touches 0 or 1
    C3  dPhi/dt = 0 where P crosses 1/2
    C4  RWA sanity: peak Rabi frequency and peak detuning below omega0/10
        (only when ``system`` is given)
    CPhaseRel  field synthesis singular on the grid (only with ``system``)

    Each failed constraint contributes one entry, located at its worst point.
    """
    tols = tols or ValidationTolerances()
    if system is not None:
        needed = 10.0 * (grid.tf - grid.t0) * system.omega0 / (2.0 * math.pi)
        if grid.n_steps < needed:
            raise ValueError(f"validation grid too coarse: need at least {math.ceil(needed)} steps")
    ts = grid.times
    p = population.evaluate(ts)
    ph = phase.evaluate(ts)
    out: list[Violation] = []

    excess = np.maximum(p.value - 1.0, -p.value)
    bad = excess > tols.pop
    if bad.any():
        k = _worst(bad, excess)
        out.append(Violation("C1", float(ts[k]), float(excess[k]), "population leaves [0, 1]"))

    at_edge = (p.value <= tols.pop) | (p.value >= 1.0 - tols.pop)
    bad = at_edge & (np.abs(p.d1) > tols.rate)
    if bad.any():
        k = _worst(bad, np.abs(p.d1))
        out.append(
            Violation("C2", float(ts[k]), float(abs(p.d1[k])), "population reaches 0 or 1 with nonzero slope")
        )

    c3 = _check_half_crossings(population, phase, grid, p, ph, tols)
    if c3 is not None:
        out.append(c3)

    if system is not None:
        out.extend(_check_rwa(population, phase, ts, system))
    return ValidationReport(tuple(out))


def _check_half_crossings(population, phase, grid, p, ph, tols):
    # Phi' must vanish at every crossing. Grid points inside the 1/2 band are
    # allowed the linear drift Phi'' * dt with dt = (P - 1/2)/P' to the crossing.
    ts = grid.times
    worst_t, worst_m = None, 0.0
    for tc in find_half_crossings(population, grid, tols.crossing):
        rate = abs(phase.evaluate(tc).d1)
        if rate > tols.phase_rate and rate > worst_m:
            worst_t, worst_m = tc, rate
    in_band = np.abs(p.value - 0.5) <= tols.half
    with np.errstate(divide="ignore", invalid="ignore"):
        drift = np.where(
            p.d1 != 0, np.abs(ph.d2) * np.abs(p.value - 0.5) / np.abs(p.d1), 0.0
        )
    excess = np.abs(ph.d1) - drift
    bad = in_band & (excess > tols.phase_rate)
    if bad.any():
        k = _worst(bad, excess)
        if abs(ph.d1[k]) > worst_m:
            worst_t, worst_m = float(ts[k]), float(abs(ph.d1[k]))
    if worst_t is None:
        return None
    return Violation("C3", worst_t, worst_m, "relative phase changes while populations are equal")


def _check_rwa(population, phase, ts, system):
    from .synthesis import SingularityError, field_at

    out = []
    try:
        fs = field_at(system, population, phase, ts)
    except SingularityError as exc:
        return [Violation("CPhaseRel", exc.time, float("inf"), str(exc))]
    limit = system.omega0 / 10.0
    rabi = np.abs(system.mu * fs.envelope)
    if rabi.max() > limit:
        k = int(np.argmax(rabi))
        out.append(Violation("C4", float(ts[k]), float(rabi[k]), "Rabi frequency exceeds omega0/10"))
    det = np.abs(fs.detuning)
    if det.max() > limit:
        k = int(np.argmax(det))
        out.append(Violation("C4", float(ts[k]), float(det[k]), "detuning exceeds omega0/10"))
    return out
