"""Physical constants, unit conversions, system parameters and time grids.

Everything downstream works in atomic units (hbar = e = m_e = 1). The
conversions below are the only place where eV, fs or V/m appear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Frozen conversion constants (CODATA values, truncated for reproducibility)
HARTREE_EV = 27.211386
HARTREE_MEV = HARTREE_EV * 1e3
AU_TIME_FS = 0.02418884
AU_FIELD_V_PER_M = 5.14221e11

# (from, to) -> (constant, multiply?); division keeps e.g. eV -> hartree exact
_CONVERSIONS = {
    ("eV", "hartree"): (HARTREE_EV, False),
    ("hartree", "eV"): (HARTREE_EV, True),
    ("hartree", "meV"): (HARTREE_MEV, True),
    ("meV", "hartree"): (HARTREE_MEV, False),
    ("fs", "au_time"): (AU_TIME_FS, False),
    ("au_time", "fs"): (AU_TIME_FS, True),
    ("au_field", "V/m"): (AU_FIELD_V_PER_M, True),
    ("V/m", "au_field"): (AU_FIELD_V_PER_M, False),
    ("1/fs", "au_freq"): (AU_TIME_FS, True),
    ("au_freq", "1/fs"): (AU_TIME_FS, False),
}

UNIT_PAIRS = tuple(_CONVERSIONS)


class UnitError(ValueError):
    """Raised for a unit pair outside the supported conversions."""


def convert_unit(value, from_unit: str, to_unit: str):
    """Convert ``value`` between one of the supported unit pairs.

    Works on floats and numpy arrays alike. Supported pairs are
    eV<->hartree, hartree<->meV, fs<->au_time, au_field<->V/m and
    1/fs<->au_freq.
    """
    try:
        constant, multiply = _CONVERSIONS[(from_unit, to_unit)]
    except KeyError:
        raise UnitError(
            f"unsupported conversion {from_unit!r} -> {to_unit!r}; "
            f"supported pairs: {', '.join(f'{a}->{b}' for a, b in UNIT_PAIRS)}"
        ) from None
    return value * constant if multiply else value / constant


def fs_to_au(t_fs):
    return convert_unit(t_fs, "fs", "au_time")


def au_to_fs(t_au):
    return convert_unit(t_au, "au_time", "fs")


def rate_fs_to_au(rate):
    return convert_unit(rate, "1/fs", "au_freq")


@dataclass(frozen=True)
class SystemParams:
    """Two-level system with E_g = 0 and E_e = omega0 (hartree)."""

    omega0: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0):
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if not math.isfinite(self.mu) or self.mu == 0:
            raise ValueError(f"dipole mu must be nonzero, got {self.mu}")

    @property
    def carrier_period(self) -> float:
        """Period 2*pi/omega0 of the resonant carrier, in a.u. time."""
        return 2.0 * math.pi / self.omega0


def make_system(omega0_eV: float, mu_au: float) -> SystemParams:
    if not omega0_eV > 0:
        raise ValueError(f"omega0_eV must be positive, got {omega0_eV}")
    if mu_au == 0:
        raise ValueError("dipole mu_au must be nonzero")
    return SystemParams(omega0=convert_unit(omega0_eV, "eV", "hartree"), mu=float(mu_au))


SODIUM = make_system(2.1, 2.479)


@dataclass(frozen=True)
class TimeGrid:
    """Evenly spaced grid of ``n_steps`` intervals on [t0, tf] (a.u.)."""

    t0: float
    tf: float
    n_steps: int

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")

    @property
    def step(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        ts = self.t0 + self.step * np.arange(self.n_steps + 1)
        ts[-1] = self.tf
        return ts

    @classmethod
    def from_fs(cls, t0_fs: float, tf_fs: float, n_steps: int) -> TimeGrid:
        return cls(fs_to_au(t0_fs), fs_to_au(tf_fs), n_steps)
