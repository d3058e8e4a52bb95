"""Scenario loading, figure presets, the validate -> synthesize -> simulate
pipeline, summary metrics and CSV output."""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator

from . import core
from .core import SystemParams, TimeGrid, convert_unit, fs_to_au, make_system, rate_fs_to_au
from .dynamics import TimeSeries, init_state, integrate, required_steps
from .synthesis import FieldSample, rwa_envelope, synthesize
from .trajectories import (
    ConstantPhase,
    ConstantPopulation,
    LinearPhase,
    LinearPopulation,
    QuadraticPopulation,
    SechPairPhase,
    SechPopulation,
    TanhPhase,
    TanhPopulation,
    Trajectory,
    TrajectoryError,
    ValidationReport,
    build_quadratic_vertex,
    validate,
)

DEFAULT_SAMPLES = 2000
DEFAULT_STEPS_PER_PERIOD = 200
DEFAULT_RWA_STEPS = 2000

CSV_COLUMNS = (
    "t_fs",
    "P_target",
    "Phi_target_rad",
    "field_au",
    "field_V_per_m",
    "envelope_V_per_m",
    "detuning_meV",
    "P_rwa",
    "phi_rwa_rad",
    "P_full",
    "phi_full_rad",
    "norm_residual",
)


class ScenarioError(ValueError):
    """Scenario document does not match the schema."""


class ValidationRefused(RuntimeError):
    """The trajectory pair failed validation and no override was given."""

    def __init__(self, report: ValidationReport):
        super().__init__(f"validation failed:\n{report}")
        self.report = report


# ---------------------------------------------------------------------------
# schema

_prob = {"type": "number", "minimum": 0, "maximum": 1}
_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

POPULATION_KINDS = {
    "constant": {"P0": _prob},
    "linear": {"P_i": _prob, "P_f": _prob},
    "quadratic": {"P_i": _prob, "P_f": _prob, "t_half_fs": _num},
    "tanh": {"P_i": _prob, "P_f": _prob, "alpha_per_fs": _pos, "t_half_fs": _num},
    "sech": {"P_ends": _prob, "P_max": _prob, "xi_per_fs": _pos, "t_peak_fs": _num},
}
PHASE_KINDS = {
    "constant": {"Phi0": _num},
    "linear": {"Phi_i": _num, "Phi_f": _num},
    "quadratic_vertex": {"Phi_i": _num, "Phi_f": _num, "t_vertex_fs": _num},
    "sech_pair": {"Phi_i": _num, "Phi_f": _num, "Phi_max": _num, "eta1_per_fs": _pos, "t_vertex_fs": _num},
    "tanh": {"Phi_i": _num, "Phi_f": _num, "chi_per_fs": _pos, "t_center_fs": _num},
}
_OPTIONAL = {("sech", "t_peak_fs")}


def _family_schema(kinds):
    branches = []
    for kind, params in kinds.items():
        required = ["kind"] + [p for p in params if (kind, p) not in _OPTIONAL]
        branches.append(
            {
                "if": {"properties": {"kind": {"const": kind}}, "required": ["kind"]},
                "then": {
                    "properties": {"kind": True, **params},
                    "required": required,
                    "additionalProperties": False,
                },
            }
        )
    return {
        "type": "object",
        "required": ["kind"],
        "properties": {"kind": {"enum": list(kinds)}},
        "allOf": branches,
    }


SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "time", "population", "phase"],
    "properties": {
        "name": {"type": "string"},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega0_eV", "mu_au"],
            "properties": {"omega0_eV": _pos, "mu_au": {"type": "number", "not": {"const": 0}}},
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t0_fs", "tf_fs"],
            "properties": {
                "t0_fs": _num,
                "tf_fs": _num,
                "steps_per_period": {"type": "integer", "minimum": 50},
                "rwa_steps": {"type": "integer", "minimum": 200},
                "samples": {"type": "integer", "minimum": 3},
            },
        },
        "population": _family_schema(POPULATION_KINDS),
        "phase": _family_schema(PHASE_KINDS),
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"rwa": {"type": "boolean"}, "full": {"type": "boolean"}},
        },
        "synthesis_mode": {"enum": ["general", "constant_phase", "constant_population"]},
    },
}

_VALIDATOR = Draft202012Validator(SCENARIO_SCHEMA)


def _path(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1]
        parts.append(missing)
    elif error.validator == "additionalProperties":
        extra = error.message.split("'")[1]
        parts.append(extra)
    return ".".join(parts) or "<root>"


@dataclass(frozen=True)
class Scenario:
    name: str
    system: SystemParams
    t0: float
    tf: float
    steps_per_period: int
    rwa_steps: int
    samples: int
    population: Trajectory
    phase: Trajectory
    p_final: float
    phi_final: float
    simulate_rwa: bool
    simulate_full: bool
    synthesis_mode: str
    document: dict

    @property
    def output_grid(self) -> TimeGrid:
        return TimeGrid(self.t0, self.tf, self.samples - 1)


def _build_population(doc, t0, tf) -> tuple[Trajectory, float]:
    kind = doc["kind"]
    if kind == "constant":
        return ConstantPopulation(doc["P0"]), doc["P0"]
    if kind == "linear":
        return LinearPopulation(doc["P_i"], doc["P_f"], t0, tf), doc["P_f"]
    if kind == "quadratic":
        return QuadraticPopulation(doc["P_i"], doc["P_f"], fs_to_au(doc["t_half_fs"]), t0, tf), doc["P_f"]
    if kind == "tanh":
        traj = TanhPopulation(doc["P_i"], doc["P_f"], rate_fs_to_au(doc["alpha_per_fs"]), fs_to_au(doc["t_half_fs"]))
        return traj, doc["P_f"]
    t_peak = fs_to_au(doc["t_peak_fs"]) if "t_peak_fs" in doc else 0.5 * (t0 + tf)
    return SechPopulation(doc["P_ends"], doc["P_max"], rate_fs_to_au(doc["xi_per_fs"]), t_peak), doc["P_ends"]


def _build_phase(doc, t0, tf) -> tuple[Trajectory, float]:
    kind = doc["kind"]
    if kind == "constant":
        return ConstantPhase(doc["Phi0"]), doc["Phi0"]
    if kind == "linear":
        return LinearPhase(doc["Phi_i"], doc["Phi_f"], t0, tf), doc["Phi_f"]
    if kind == "quadratic_vertex":
        return build_quadratic_vertex(doc["Phi_i"], doc["Phi_f"], fs_to_au(doc["t_vertex_fs"]), t0, tf), doc["Phi_f"]
    if kind == "sech_pair":
        traj = SechPairPhase(
            doc["Phi_i"], doc["Phi_f"], doc["Phi_max"], rate_fs_to_au(doc["eta1_per_fs"]),
            fs_to_au(doc["t_vertex_fs"]), t0, tf,
        )
        return traj, doc["Phi_f"]
    traj = TanhPhase(doc["Phi_i"], doc["Phi_f"], rate_fs_to_au(doc["chi_per_fs"]), fs_to_au(doc["t_center_fs"]))
    return traj, doc["Phi_f"]


def scenario_from_dict(doc: dict) -> Scenario:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ScenarioError(f"{_path(err)}: {err.message}")
    doc = copy.deepcopy(doc)
    tm = doc["time"]
    if not tm["tf_fs"] > tm["t0_fs"]:
        raise ScenarioError("time.tf_fs: must exceed time.t0_fs")
    system = make_system(doc["system"]["omega0_eV"], doc["system"]["mu_au"])
    t0, tf = fs_to_au(tm["t0_fs"]), fs_to_au(tm["tf_fs"])
    try:
        population, p_final = _build_population(doc["population"], t0, tf)
    except TrajectoryError as exc:
        raise ScenarioError(f"population: {exc}") from None
    try:
        phase, phi_final = _build_phase(doc["phase"], t0, tf)
    except TrajectoryError as exc:
        raise ScenarioError(f"phase: {exc}") from None
    mode = doc.get("synthesis_mode", "general")
    if mode == "constant_population":
        if not isinstance(population, ConstantPopulation):
            raise ScenarioError("synthesis_mode: constant_population needs population kind 'constant'")
        if population.p0 == 0.5:
            raise ScenarioError("population.P0: constant_population mode cannot hold P0 = 1/2")
    if mode == "constant_phase" and not isinstance(phase, ConstantPhase):
        raise ScenarioError("synthesis_mode: constant_phase needs phase kind 'constant'")
    sim = doc.get("simulate", {})
    return Scenario(
        name=doc.get("name", "scenario"),
        system=system,
        t0=t0,
        tf=tf,
        steps_per_period=tm.get("steps_per_period", DEFAULT_STEPS_PER_PERIOD),
        rwa_steps=tm.get("rwa_steps", DEFAULT_RWA_STEPS),
        samples=tm.get("samples", DEFAULT_SAMPLES),
        population=population,
        phase=phase,
        p_final=p_final,
        phi_final=phi_final,
        simulate_rwa=sim.get("rwa", True),
        simulate_full=sim.get("full", True),
        synthesis_mode=mode,
        document=doc,
    )


def load_scenario(text: str) -> Scenario:
    """Parse a JSON scenario document (times in fs, rates in 1/fs, phases in rad)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"<root>: not valid JSON ({exc})") from None
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# presets

_SODIUM = {"omega0_eV": 2.1, "mu_au": 2.479}
_ALPHA_FIG5 = 0.04

PRESETS: dict[str, dict[str, Any]] = {
    "fig2": {
        "name": "fig2",
        "system": _SODIUM,
        "time": {"t0_fs": 0.0, "tf_fs": 100.0},
        "population": {"kind": "constant", "P0": 0.3},
        "phase": {"kind": "linear", "Phi_i": 0.0, "Phi_f": math.pi / 4},
        "synthesis_mode": "constant_population",
    },
    "fig3": {
        "name": "fig3",
        "system": _SODIUM,
        "time": {"t0_fs": 0.0, "tf_fs": 100.0},
        "population": {"kind": "linear", "P_i": 0.8, "P_f": 0.3},
        "phase": {"kind": "quadratic_vertex", "Phi_i": 0.0, "Phi_f": math.pi / 4, "t_vertex_fs": 60.0},
    },
    "fig4": {
        "name": "fig4",
        "system": _SODIUM,
        "time": {"t0_fs": 0.0, "tf_fs": 100.0},
        "population": {"kind": "tanh", "P_i": 0.1, "P_f": 1.0, "alpha_per_fs": 0.068, "t_half_fs": 60.0},
        "phase": {"kind": "quadratic_vertex", "Phi_i": 0.0, "Phi_f": math.pi / 2, "t_vertex_fs": 60.0},
    },
    "fig5": {
        "name": "fig5",
        "system": _SODIUM,
        "time": {"t0_fs": 0.0, "tf_fs": 200.0},
        "population": {"kind": "tanh", "P_i": 0.99, "P_f": 0.01, "alpha_per_fs": _ALPHA_FIG5, "t_half_fs": 100.0},
        "phase": {
            "kind": "sech_pair",
            "Phi_i": 0.0,
            "Phi_f": math.pi / 4,
            "Phi_max": 1.4 * (math.pi / 4),
            "eta1_per_fs": 1.65 * _ALPHA_FIG5,
            "t_vertex_fs": 100.0,
        },
    },
    "fig6": {
        "name": "fig6",
        "system": _SODIUM,
        "time": {"t0_fs": 0.0, "tf_fs": 200.0},
        "population": {"kind": "sech", "P_ends": 0.5, "P_max": 0.7, "xi_per_fs": 0.08, "t_peak_fs": 100.0},
        "phase": {"kind": "tanh", "Phi_i": 0.0, "Phi_f": math.pi / 8, "chi_per_fs": 0.08, "t_center_fs": 100.0},
    },
    # quadratic population through P = 1/2 at 30 fs with a quadratic phase
    "quadpop": {
        "name": "quadpop",
        "system": _SODIUM,
        "time": {"t0_fs": 0.0, "tf_fs": 100.0},
        "population": {"kind": "quadratic", "P_i": 0.1, "P_f": 0.8, "t_half_fs": 30.0},
        "phase": {"kind": "quadratic_vertex", "Phi_i": 0.0, "Phi_f": math.pi / 4, "t_vertex_fs": 30.0},
    },
}

FIGURE_PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6")


def preset_document(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def preset(name: str) -> Scenario:
    return scenario_from_dict(preset_document(name))


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class SummaryMetrics:
    final_pop_error: float
    final_phase_error: float
    max_pop_deviation: float
    max_norm_residual: float
    peak_field_V_per_m: float
    peak_detuning_meV: float
    mode: str

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    times: np.ndarray
    field_series: FieldSample
    validation: ValidationReport
    series_rwa: TimeSeries | None = None
    series_full: TimeSeries | None = None
    stride_rwa: int = 1
    stride_full: int = 1
    summary: SummaryMetrics | None = None


def _field_fn(s: Scenario):
    def field(t):
        return synthesize(s.system, s.population, s.phase, t, s.synthesis_mode)

    return field


def validation_grid(s: Scenario) -> TimeGrid:
    needed = math.ceil(10.0 * (s.tf - s.t0) * s.system.omega0 / (2.0 * math.pi))
    return TimeGrid(s.t0, s.tf, max(s.samples - 1, needed))


def integration_grid(s: Scenario, mode: str) -> tuple[TimeGrid, int]:
    """Integrator grid for ``mode`` and its stride onto the output grid."""
    n_out = s.samples - 1
    if mode == "full":
        period = s.system.carrier_period
        need = max(
            math.ceil((s.tf - s.t0) / (period / s.steps_per_period) - 1e-9),
            required_steps(s.system, s.output_grid, "full"),
        )
    else:
        need = max(s.rwa_steps, required_steps(s.system, s.output_grid, "rwa"))
    stride = max(1, math.ceil(need / n_out))
    return TimeGrid(s.t0, s.tf, n_out * stride), stride


def simulate(s: Scenario, mode: str, steps: int | None = None) -> TimeSeries:
    """Integrate the synthesized field for ``s`` in ``mode`` ('rwa' or 'full')."""
    grid = integration_grid(s, mode)[0] if steps is None else TimeGrid(s.t0, s.tf, steps)
    start = s.population.evaluate(s.t0).value, s.phase.evaluate(s.t0).value
    s0 = init_state(*start)
    field = _field_fn(s)
    if mode == "rwa":
        return integrate(s.system, s0, grid, envelope=lambda t: rwa_envelope(field(t)))
    return integrate(s.system, s0, grid, field=lambda t: field(t).epsilon)


def run(
    s: Scenario,
    override_validation: bool = False,
    rwa: bool | None = None,
    full: bool | None = None,
) -> RunResult:
    """Validate, synthesize on the output grid, simulate and summarize.

    ``rwa``/``full`` override the scenario's simulate flags when given.
    """
    report = validate(s.population, s.phase, validation_grid(s), system=s.system)
    if not report.accepted and not override_validation:
        raise ValidationRefused(report)
    times = s.output_grid.times
    fs = _field_fn(s)(times)
    do_rwa = s.simulate_rwa if rwa is None else rwa
    do_full = s.simulate_full if full is None else full
    series, strides = {}, {"rwa": 1, "full": 1}
    for mode, wanted in (("rwa", do_rwa), ("full", do_full)):
        if wanted:
            strides[mode] = integration_grid(s, mode)[1]
            series[mode] = simulate(s, mode)
    result = RunResult(
        scenario=s,
        times=times,
        field_series=fs,
        validation=report,
        series_rwa=series.get("rwa"),
        series_full=series.get("full"),
        stride_rwa=strides["rwa"],
        stride_full=strides["full"],
    )
    if series:
        result = replace(result, summary=summarize(result))
    return result


def summarize(r: RunResult, mode: str | None = None) -> SummaryMetrics:
    """Metrics against the prescribed trajectories; prefers the full simulation."""
    if mode is None:
        mode = "full" if r.series_full is not None else "rwa"
    series = r.series_full if mode == "full" else r.series_rwa
    if series is None:
        raise ValueError("summary needs at least one simulation")
    s = r.scenario
    target = s.population.evaluate(series.times).value
    phi_target = s.phase.evaluate(series.times).value
    residuals = [x.norm_residual.max() for x in (r.series_rwa, r.series_full) if x is not None]
    det = np.atleast_1d(r.field_series.detuning)
    k = int(np.argmax(np.abs(det)))
    return SummaryMetrics(
        final_pop_error=float(abs(series.populations_g[-1] - target[-1])),
        final_phase_error=float(abs(series.relative_phase[-1] - phi_target[-1])),
        max_pop_deviation=float(np.max(np.abs(series.populations_g - target))),
        max_norm_residual=float(max(residuals)),
        peak_field_V_per_m=float(convert_unit(np.max(np.abs(r.field_series.envelope)), "au_field", "V/m")),
        peak_detuning_meV=float(convert_unit(det[k], "hartree", "meV")),
        mode=mode,
    )


def _fmt(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def emit_csv(r: RunResult, destination) -> int:
    """Write one row per output-grid point; returns the number of data rows.

    ``destination`` is a path or a text stream.
    """
    s = r.scenario
    fs = r.field_series
    n = len(r.times)
    p_target = s.population.evaluate(r.times).value
    phi_target = s.phase.evaluate(r.times).value
    cols = {
        "t_fs": core.au_to_fs(r.times),
        "P_target": p_target,
        "Phi_target_rad": phi_target,
        "field_au": np.broadcast_to(fs.epsilon, (n,)),
        "field_V_per_m": convert_unit(np.broadcast_to(fs.epsilon, (n,)), "au_field", "V/m"),
        "envelope_V_per_m": convert_unit(np.broadcast_to(fs.envelope, (n,)), "au_field", "V/m"),
        "detuning_meV": convert_unit(np.broadcast_to(fs.detuning, (n,)), "hartree", "meV"),
    }
    empty = np.full(n, np.nan)
    residual = None
    for mode, series, stride in (("rwa", r.series_rwa, r.stride_rwa), ("full", r.series_full, r.stride_full)):
        if series is None:
            cols[f"P_{mode}"] = cols[f"phi_{mode}_rad"] = empty
            continue
        cols[f"P_{mode}"] = series.populations_g[::stride]
        cols[f"phi_{mode}_rad"] = series.relative_phase[::stride]
        res = series.norm_residual[::stride]
        residual = res if residual is None else np.maximum(residual, res)
    cols["norm_residual"] = empty if residual is None else residual

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i in range(n):
        writer.writerow([_fmt(cols[c][i]) for c in CSV_COLUMNS])
    text = buf.getvalue()
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        destination.write(text)
    return n
