"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary and by running this file directly.
"""
import math
import time

import numpy as np
import pytest

from tlscontrol.core import convert_unit
from tlscontrol.dynamics import phase_relation_residual
from tlscontrol.harness import FIGURE_PRESETS, ValidationRefused, preset, run, scenario_from_dict, simulate
from tlscontrol.synthesis import SingularityError, detuning_at, field_constant_population
from tlscontrol.trajectories import LinearPhase, TrajectoryError, build_quadratic_vertex

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[n])


@pytest.fixture(scope="module")
def rwa_series():
    start = time.perf_counter()
    series = {name: simulate(preset(name), "rwa") for name in FIGURE_PRESETS}
    return series, time.perf_counter() - start


@pytest.fixture(scope="module")
def full_series():
    return {name: simulate(preset(name), "full") for name in FIGURE_PRESETS}


def round_trip_error(s, series):
    p = s.population.evaluate(series.times).value
    phi = s.phase.evaluate(series.times).value
    return np.abs(series.populations_g - p).max(), np.nanmax(np.abs(series.relative_phase - phi))


def test_c1_fig2_amplitude():
    start = time.perf_counter()
    r = run(preset("fig2"))
    elapsed = time.perf_counter() - start
    peak = r.summary.peak_field_V_per_m
    hand = (2 / 2.479) * convert_unit(math.pi / 4 / 100.0, "1/fs", "au_freq") * math.sqrt(0.21) / 0.4 * 5.14221e11
    ok = abs(peak / 0.9e8 - 1) < 0.02 and abs(peak / hand - 1) < 1e-9 and elapsed < 1.0
    record(1, ok, f"peak envelope {peak:.4e} V/m (hand {hand:.4e}), {elapsed:.3f} s")
    assert ok


def test_c2_fig2_detuning():
    s = preset("fig2")
    det = convert_unit(detuning_at(s.population, s.phase, s.output_grid.times), "hartree", "meV")
    worst = np.abs(det / 5.17 - 1).max()
    ok = worst < 0.01
    record(2, ok, f"detuning {det.min():.5f}..{det.max():.5f} meV, worst rel. deviation {worst:.2e}")
    assert ok


def test_c3_rwa_round_trip(rwa_series):
    series, elapsed = rwa_series
    errs = {name: round_trip_error(preset(name), series[name]) for name in FIGURE_PRESETS}
    worst_p = max(e[0] for e in errs.values())
    worst_phi = max(e[1] for e in errs.values())
    ok = worst_p < 1e-6 and worst_phi < 1e-6 and elapsed < 5.0
    record(3, ok, f"max |dP| {worst_p:.1e}, max |dPhi| {worst_phi:.1e} rad, {elapsed:.2f} s")
    assert ok


def test_c4_full_field(full_series):
    parts, ok = [], True
    s2 = preset("fig2")
    dev = np.abs(full_series["fig2"].populations_g - 0.3).max()
    ok &= dev < 0.02
    parts.append(f"fig2 max|P-0.3| {dev:.4f}")
    for name in FIGURE_PRESETS[1:]:
        s, ser = preset(name), full_series[name]
        dp = abs(ser.populations_g[-1] - s.population.evaluate(s.tf).value)
        dphi = abs(ser.relative_phase[-1] - s.phi_final)
        good = dp < 0.02 and dphi < 0.05
        ok &= good
        parts.append(f"{name} dP {dp:.4f} dPhi {dphi:.4f}{'' if good else ' <- out of band'}")
    assert s2.population.evaluate(s2.tf).value == 0.3
    record(4, ok, "; ".join(parts))
    assert ok


def test_c5_norm(rwa_series, full_series):
    worst = max(
        max(ser.norm_residual.max() for ser in rwa_series[0].values()),
        max(ser.norm_residual.max() for ser in full_series.values()),
    )
    ok = worst < 1e-10
    record(5, ok, f"max norm residual {worst:.2e}")
    assert ok


def test_c6_phase_relation(rwa_series):
    worst = max(np.abs(phase_relation_residual(ser)).max() for ser in rwa_series[0].values())
    ok = worst < 1e-5
    record(6, ok, f"max residual {worst:.2e} 1/a.u.")
    assert ok


def test_c7_constraints():
    checks = {}
    try:
        build_quadratic_vertex(0.0, 1.0, 50.0, 0.0, 100.0)
        checks["a"] = False
    except TrajectoryError:
        checks["a"] = True
    try:
        field_constant_population(preset("fig2").system, 0.5, LinearPhase(0.0, 1.0, 0.0, 100.0), 10.0)
        checks["b"] = False
    except SingularityError:
        checks["b"] = True
    doc = {
        "system": {"omega0_eV": 2.1, "mu_au": 2.479},
        "time": {"t0_fs": 0.0, "tf_fs": 100.0},
        "population": {"kind": "linear", "P_i": 0.5, "P_f": 1.0},
        "phase": {"kind": "constant", "Phi0": 0.0},
    }
    try:
        run(scenario_from_dict(doc))
        checks["c"] = False
    except ValidationRefused as exc:
        checks["c"] = "C2" in exc.report.ids()
    ok = all(checks.values())
    record(7, ok, ", ".join(f"({k}) {'refused' if v else 'accepted'}" for k, v in checks.items()))
    assert ok


def test_c8_integrator_order():
    s = preset("fig4")
    errs = []
    for n in (200, 400, 800):
        ser = simulate(s, "rwa", steps=n)
        errs.append(max(round_trip_error(s, ser)))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(abs(r - 16) <= 4 for r in ratios) and errs[-1] > 1e-12
    record(8, ok, f"errors {errs[0]:.2e}, {errs[1]:.2e}, {errs[2]:.2e}; ratios {ratios[0]:.2f}, {ratios[1]:.2f}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
