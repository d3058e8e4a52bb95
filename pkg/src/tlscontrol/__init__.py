"""Analytic control fields steering a two-level system along prescribed
population and relative-phase trajectories."""

from .core import SODIUM, SystemParams, TimeGrid, convert_unit, make_system
from .dynamics import QuantumState, TimeSeries, init_state, integrate
from .harness import RunResult, Scenario, emit_csv, load_scenario, preset, run, summarize
from .synthesis import FieldSample, SingularityError, field_at, rwa_envelope
from .trajectories import ValidationReport, validate

__all__ = [
    "SODIUM",
    "FieldSample",
    "QuantumState",
    "RunResult",
    "Scenario",
    "SingularityError",
    "SystemParams",
    "TimeGrid",
    "TimeSeries",
    "ValidationReport",
    "convert_unit",
    "emit_csv",
    "field_at",
    "init_state",
    "integrate",
    "load_scenario",
    "make_system",
    "preset",
    "run",
    "rwa_envelope",
    "summarize",
    "validate",
]
