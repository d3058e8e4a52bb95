import io
import json
import math

import numpy as np
import pytest

from tlscontrol.cli import main
from tlscontrol.core import fs_to_au, rate_fs_to_au
from tlscontrol.harness import (
    CSV_COLUMNS,
    FIGURE_PRESETS,
    PRESETS,
    ScenarioError,
    ValidationRefused,
    emit_csv,
    load_scenario,
    preset,
    preset_document,
    run,
    scenario_from_dict,
    summarize,
)
from tlscontrol.synthesis import SingularityError
from tlscontrol.trajectories import (
    ConstantPopulation,
    LinearPhase,
    LinearPopulation,
    SechPopulation,
    TanhPhase,
    TanhPopulation,
)


def doc(**overrides):
    d = {
        "system": {"omega0_eV": 2.1, "mu_au": 2.479},
        "time": {"t0_fs": 0.0, "tf_fs": 100.0},
        "population": {"kind": "linear", "P_i": 0.8, "P_f": 0.3},
        "phase": {"kind": "quadratic_vertex", "Phi_i": 0.0, "Phi_f": math.pi / 4, "t_vertex_fs": 60.0},
    }
    d.update(overrides)
    return d


# --- loading


def test_load_fig3_document():
    s = load_scenario(json.dumps(doc()))
    assert isinstance(s.population, LinearPopulation)
    assert (s.population.p_i, s.population.p_f) == (0.8, 0.3)
    assert s.tf == pytest.approx(fs_to_au(100.0))
    assert s.synthesis_mode == "general"


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda d: d["population"].update(kind="cubic"), "population.kind"),
        (lambda d: d["system"].pop("mu_au"), "system.mu_au"),
        (lambda d: d["population"].update(P_i=1.3), "population.P_i"),
        (lambda d: d["population"].update(alpha_per_fs=0.1), "population.alpha_per_fs"),
        (lambda d: d["time"].update(steps_per_period=10), "time.steps_per_period"),
        (lambda d: d.update(colour="blue"), "colour"),
    ],
)
def test_schema_errors_name_the_path(mutate, where):
    d = doc()
    mutate(d)
    with pytest.raises(ScenarioError, match=f"^{where}"):
        scenario_from_dict(d)


def test_bad_json():
    with pytest.raises(ScenarioError, match="JSON"):
        load_scenario("{")


def test_reversed_time_window():
    with pytest.raises(ScenarioError, match="tf_fs"):
        scenario_from_dict(doc(time={"t0_fs": 10.0, "tf_fs": 5.0}))


def test_midpoint_vertex_rejected_at_load():
    d = doc(phase={"kind": "quadratic_vertex", "Phi_i": 0.0, "Phi_f": 1.0, "t_vertex_fs": 50.0})
    with pytest.raises(ScenarioError, match="^phase"):
        scenario_from_dict(d)


def test_constant_population_mode_rules():
    d = doc(synthesis_mode="constant_population")
    with pytest.raises(ScenarioError, match="constant"):
        scenario_from_dict(d)
    d = doc(
        synthesis_mode="constant_population",
        population={"kind": "constant", "P0": 0.5},
        phase={"kind": "linear", "Phi_i": 0.0, "Phi_f": 1.0},
    )
    with pytest.raises(ScenarioError, match="1/2"):
        scenario_from_dict(d)


# --- presets


def test_preset_fig2():
    s = preset("fig2")
    assert isinstance(s.population, ConstantPopulation) and s.population.p0 == 0.3
    assert isinstance(s.phase, LinearPhase)
    assert s.phi_final == math.pi / 4
    assert s.tf == pytest.approx(fs_to_au(100.0))
    assert s.synthesis_mode == "constant_population"


def test_preset_fig4():
    s = preset("fig4")
    assert isinstance(s.population, TanhPopulation)
    assert s.population.alpha == pytest.approx(rate_fs_to_au(0.068), rel=1e-15)
    assert s.population.t_half == pytest.approx(fs_to_au(60.0), rel=1e-15)
    assert s.phi_final == math.pi / 2


def test_preset_fig5_caption_ratios():
    d = PRESETS["fig5"]
    assert d["phase"]["Phi_max"] == 1.4 * d["phase"]["Phi_f"]
    assert d["phase"]["eta1_per_fs"] == 1.65 * d["population"]["alpha_per_fs"]
    assert (d["population"]["P_i"], d["population"]["P_f"]) == (0.99, 0.01)


def test_preset_fig6():
    s = preset("fig6")
    assert isinstance(s.population, SechPopulation) and isinstance(s.phase, TanhPhase)
    p = PRESETS["fig6"]
    assert (p["population"]["P_ends"], p["population"]["P_max"], p["population"]["t_peak_fs"]) == (0.5, 0.7, 100.0)
    assert (p["phase"]["Phi_f"], p["phase"]["chi_per_fs"], p["population"]["xi_per_fs"]) == (math.pi / 8, 0.08, 0.08)
    assert s.tf == pytest.approx(fs_to_au(200.0))


def test_unknown_preset():
    with pytest.raises(ScenarioError, match="fig9"):
        preset("fig9")


def test_preset_document_is_a_copy():
    d = preset_document("fig3")
    d["population"]["P_i"] = 0.1
    assert PRESETS["fig3"]["population"]["P_i"] == 0.8


# --- run


def test_run_refuses_population_reaching_one():
    d = doc(population={"kind": "linear", "P_i": 0.5, "P_f": 1.0}, phase={"kind": "constant", "Phi0": 0.0})
    with pytest.raises(ValidationRefused) as info:
        run(scenario_from_dict(d))
    assert "C2" in info.value.report.ids()


def test_run_override_attaches_report():
    # Rabi frequency far above the RWA limit: synthesizable, but flagged
    d = doc(
        population={"kind": "tanh", "P_i": 0.1, "P_f": 0.9, "alpha_per_fs": 3.0, "t_half_fs": 50.0},
        phase={"kind": "constant", "Phi0": 0.0},
    )
    r = run(scenario_from_dict(d), override_validation=True, rwa=False, full=False)
    assert "C4" in r.validation.ids()
    assert r.summary is None
    assert np.all(np.isfinite(r.field_series.epsilon))


def test_override_cannot_synthesize_a_singular_field():
    d = doc(population={"kind": "linear", "P_i": 0.5, "P_f": 1.0}, phase={"kind": "constant", "Phi0": 0.0})
    with pytest.raises(SingularityError):
        run(scenario_from_dict(d), override_validation=True, rwa=False, full=False)


@pytest.fixture(scope="module")
def fig2_result():
    return run(preset("fig2"))


def test_fig2_summary(fig2_result):
    sm = fig2_result.summary
    assert sm.peak_field_V_per_m == pytest.approx(9.03e7, rel=2e-3)
    assert sm.peak_detuning_meV == pytest.approx(5.17, rel=1e-3)
    assert sm.mode == "full"
    assert sm.max_pop_deviation < 0.02


def test_run_is_deterministic(fig2_result):
    again = run(preset("fig2"))
    np.testing.assert_array_equal(again.series_full.cg, fig2_result.series_full.cg)


def test_summary_rwa_round_trip():
    sm = run(preset("fig3"), full=False).summary
    assert sm.mode == "rwa"
    assert sm.final_pop_error < 1e-6
    assert sm.max_pop_deviation < 1e-6


def test_summary_needs_a_simulation():
    r = run(preset("fig3"), rwa=False, full=False)
    with pytest.raises(ValueError):
        summarize(r)


def test_zero_field_from_target_state_has_zero_errors():
    d = doc(population={"kind": "constant", "P0": 0.3}, phase={"kind": "constant", "Phi0": 0.2})
    sm = run(scenario_from_dict(d)).summary
    # |sqrt(0.3)|^2 differs from 0.3 in the last bit
    assert sm.final_pop_error < 1e-15 and sm.max_pop_deviation < 1e-15
    assert sm.final_phase_error == 0.0
    assert sm.peak_field_V_per_m == 0.0
    assert sm.max_norm_residual < 1e-15


# --- csv


def test_csv_row_count_and_header(fig2_result, tmp_path):
    path = tmp_path / "fig2.csv"
    assert emit_csv(fig2_result, path) == 2000
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2001


def test_csv_round_trip_precision(fig2_result):
    buf = io.StringIO()
    emit_csv(fig2_result, buf)
    row = buf.getvalue().splitlines()[500].split(",")
    assert float(row[3]) == fig2_result.field_series.epsilon[499]


def test_csv_reemission_is_byte_identical(fig2_result):
    a, b = io.StringIO(), io.StringIO()
    emit_csv(fig2_result, a)
    emit_csv(fig2_result, b)
    assert a.getvalue() == b.getvalue()


def test_csv_without_simulations_leaves_empty_cells():
    r = run(preset("fig3"), rwa=False, full=False)
    buf = io.StringIO()
    emit_csv(r, buf)
    lines = buf.getvalue().splitlines()
    for line in lines[1:]:
        cells = line.split(",")
        assert all(cells[:7]) and not any(cells[7:])


def test_csv_unwritable_destination(fig2_result, tmp_path):
    with pytest.raises(OSError):
        emit_csv(fig2_result, tmp_path / "missing" / "out.csv")


# --- cli


def _write(tmp_path, d, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def test_cli_validate_ok(tmp_path):
    out = io.StringIO()
    assert main(["validate", _write(tmp_path, doc())], out=out) == 0
    assert "accepted" in out.getvalue()


def test_cli_validate_refusal(tmp_path):
    d = doc(population={"kind": "linear", "P_i": 0.5, "P_f": 1.0}, phase={"kind": "constant", "Phi0": 0.0})
    assert main(["validate", _write(tmp_path, d)], out=io.StringIO()) == 2


def test_cli_schema_error_exit_code(tmp_path, capsys):
    d = doc()
    d["population"]["kind"] = "cubic"
    assert main(["validate", _write(tmp_path, d)], out=io.StringIO()) == 1
    assert "population.kind" in capsys.readouterr().err


def test_cli_usage_error():
    assert main(["preset", "fig9"], out=io.StringIO()) == 1


def test_cli_synthesize_writes_csv(tmp_path):
    out_csv = tmp_path / "f.csv"
    assert main(["synthesize", _write(tmp_path, doc()), "--out", str(out_csv)], out=io.StringIO()) == 0
    assert len(out_csv.read_text().splitlines()) == 2001


def test_cli_simulate_rwa_prints_summary(tmp_path):
    out = io.StringIO()
    assert main(["simulate", _write(tmp_path, doc()), "--rwa"], out=out) == 0
    summary = json.loads(out.getvalue())
    assert summary["mode"] == "rwa" and summary["final_pop_error"] < 1e-6


def test_cli_simulate_override(tmp_path):
    d = doc(population={"kind": "linear", "P_i": 0.5, "P_f": 1.0}, phase={"kind": "constant", "Phi0": 0.0})
    path = _write(tmp_path, d)
    assert main(["synthesize", path, "--out", str(tmp_path / "x.csv")], out=io.StringIO()) == 2


def test_cli_preset_dump():
    out = io.StringIO()
    assert main(["preset", "fig6", "--dump"], out=out) == 0
    assert json.loads(out.getvalue()) == PRESETS["fig6"]


@pytest.mark.parametrize("name", FIGURE_PRESETS)
def test_every_preset_validates(name):
    s = preset(name)
    r = run(s, rwa=False, full=False)
    assert r.validation.accepted, str(r.validation)
