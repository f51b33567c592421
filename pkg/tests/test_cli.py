import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cavityvac import ConfigurationError, InteractionCurve, fit_far_zone_exponent
from cavityvac.cli import (EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, ConfigParseError, UsageError,
                           grid_points, main, parse_config, parse_csv, parse_json, render_csv,
                           render_json, run, sweep, sweep_path, write_output)

CAVITY_TEXT = """\
# mobile-mirror cavity
cavity.L0 = 1e-5
cavity.M = 1e-11
cavity.omega_osc = 1e5
cavity.omega_cut = 1e16
grid.start = 0
grid.stop = 1e-5
grid.count = 9
"""

VACUUM = """\
pair.direction = 0, 0, 1
pair.omega_a = 3e15
pair.mu_A = 1e-29, 0, 0
pair.mu_B = 1e-29, 0, 0
grid.start = 2e-6
grid.stop = 2e-5
grid.count = 2000
grid.spacing = log
"""

CRYSTAL = """\
crystal.omega_l = 1.8e15
crystal.omega_u = 2e15
crystal.k0 = 1e7
"""

PAIR_GAP = """\
pair.direction = 0, 0, 1
pair.mu_A = 1e-29, 0, 0
pair.mu_B = 1e-29, 0, 0
"""

SCENARIO_TEXTS = {
    "density-scalar": CAVITY_TEXT,
    "density-em": CAVITY_TEXT,
    "casimir-polder": CAVITY_TEXT.replace("grid.start = 0", "grid.start = 9e-6")
    + "probe.alpha_E = 1e-30\nprobe.alpha_M = 2e-31\n",
    "resonance-vacuum": VACUUM.replace("grid.count = 2000", "grid.count = 50"),
    "resonance-crystal-out": PAIR_GAP + CRYSTAL + "pair.omega_a = 2.01e15\n"
    "grid.start = 1e-6\ngrid.stop = 1e-5\ngrid.count = 30\n",
    "resonance-crystal-in": PAIR_GAP + CRYSTAL + "pair.omega_a = 1.82e15\n"
    "grid.start = 1e-6\ngrid.stop = 1e-5\ngrid.count = 8\n",
    "dos": CRYSTAL + "grid.start = 0\ngrid.stop = 2.9e15\ngrid.count = 40\n",
}


def _data_rows(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


# -- configuration -----------------------------------------------------------------

def test_minimal_cavity_config():
    cfg = parse_config(CAVITY_TEXT, "density-scalar")
    assert cfg.cavity.mode_count == 106
    assert cfg.grid.count == 9 and cfg.regulator == "sharp"
    assert cfg.output_format == "csv"


def test_scenario_from_document():
    assert parse_config("scenario = density-em\n" + CAVITY_TEXT).scenario == "density-em"
    with pytest.raises(ConfigurationError):
        parse_config("scenario = density-em\n" + CAVITY_TEXT, "dos")
    with pytest.raises(ConfigurationError):
        parse_config(CAVITY_TEXT)


def test_grid_count_one():
    with pytest.raises(ConfigurationError) as err:
        parse_config(CAVITY_TEXT.replace("grid.count = 9", "grid.count = 1"), "density-scalar")
    assert err.value.key == "grid.count"


def test_negative_mass_names_key():
    with pytest.raises(ConfigurationError) as err:
        parse_config(CAVITY_TEXT.replace("cavity.M = 1e-11", "cavity.M = -1e-11"), "density-scalar")
    assert err.value.key == "cavity.M"
    assert "M" in str(err.value)


@pytest.mark.parametrize("text, line", [
    (CAVITY_TEXT + "cavity.colour = red\n", 9),
    (CAVITY_TEXT + "this is not a pair\n", 9),
    (CAVITY_TEXT + "cavity.L0 = 2e-5\n", 9),
    (CAVITY_TEXT.replace("cavity.M = 1e-11", "cavity.M = heavy"), 3),
    (CAVITY_TEXT.replace("grid.count = 9", "grid.count = 9.5"), 8),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigParseError) as err:
        parse_config(text, "density-scalar")
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_missing_and_foreign_groups():
    with pytest.raises(ConfigurationError) as err:
        parse_config(CAVITY_TEXT.replace("cavity.L0 = 1e-5\n", ""), "density-scalar")
    assert err.value.key == "cavity.L0"
    with pytest.raises(ConfigurationError):
        parse_config(CAVITY_TEXT, "casimir-polder")
    with pytest.raises(ConfigurationError):
        parse_config(CAVITY_TEXT + CRYSTAL, "density-scalar")


def test_range_checks():
    bad = [
        (CAVITY_TEXT.replace("grid.stop = 1e-5", "grid.stop = 2e-5"), "density-scalar"),
        (CAVITY_TEXT.replace("grid.start = 0", "grid.start = 2e-5"), "density-scalar"),
        (CAVITY_TEXT + "cavity.regulator = soft\n", "density-scalar"),
        (CAVITY_TEXT + "grid.spacing = log\n", "density-scalar"),
        (SCENARIO_TEXTS["resonance-crystal-out"].replace("2.01e15", "1.9e15"), "resonance-crystal-out"),
        (SCENARIO_TEXTS["resonance-crystal-in"].replace("1.82e15", "2.1e15"), "resonance-crystal-in"),
        (SCENARIO_TEXTS["casimir-polder"].replace("1e-30", "-1e-30"), "casimir-polder"),
        (CAVITY_TEXT + "output.format = xml\n", "density-scalar"),
    ]
    for text, scenario in bad:
        with pytest.raises(ConfigurationError):
            parse_config(text, scenario)


def test_wall_inset():
    cfg = parse_config(CAVITY_TEXT, "density-scalar")
    pts = grid_points(cfg)
    spacing = 1e-5 / 8
    assert pts[0] == pytest.approx(max(spacing * 1e-3, 1e-14))
    assert pts[-1] == pytest.approx(1e-5 - max(spacing * 1e-3, 1e-14))
    assert np.all(np.diff(pts) > 0)


# -- runs and files ------------------------------------------------------------------

@pytest.mark.parametrize("scenario", sorted(SCENARIO_TEXTS))
def test_every_scenario_runs(scenario):
    rec = run(parse_config(SCENARIO_TEXTS[scenario], scenario))
    assert rec.rows.shape[1] == len(rec.columns)
    assert np.all(np.isfinite(rec.rows))
    assert rec.metadata["scenario"] == scenario


@pytest.mark.parametrize("scenario", sorted(SCENARIO_TEXTS))
def test_round_trip(scenario):
    rec = run(parse_config(SCENARIO_TEXTS[scenario], scenario))
    back = parse_csv(render_csv(rec))
    assert back.columns == rec.columns and back.metadata == rec.metadata
    np.testing.assert_array_equal(back.rows, rec.rows)
    back = parse_json(render_json(rec))
    assert back.columns == rec.columns and back.metadata == rec.metadata
    np.testing.assert_array_equal(back.rows, rec.rows)


@pytest.mark.parametrize("scenario", sorted(SCENARIO_TEXTS))
def test_metadata_reproduces_run(scenario):
    rec = run(parse_config(SCENARIO_TEXTS[scenario], scenario))
    from cavityvac.cli import _KEYS
    text = "".join(f"{k} = {v}\n" for k, v in rec.metadata.items() if k in _KEYS)
    again = run(parse_config(text, scenario))
    np.testing.assert_array_equal(again.rows, rec.rows)


def test_determinism_across_threads():
    cfg = parse_config(SCENARIO_TEXTS["density-em"], "density-em")
    a = render_csv(run(cfg, threads=1))
    b = render_csv(run(cfg, threads=4))
    assert a == b


def test_timestamp_only_on_request():
    cfg = parse_config(SCENARIO_TEXTS["dos"], "dos")
    assert "timestamp" not in run(cfg).metadata
    stamped = run(cfg, timestamp=True)
    assert "timestamp" in stamped.metadata
    assert _data_rows(render_csv(stamped)) == _data_rows(render_csv(run(cfg)))


def test_atomic_write(tmp_path):
    rec = run(parse_config(SCENARIO_TEXTS["dos"], "dos"))
    out = write_output(rec, tmp_path / "d.json", "json")
    assert parse_json(out.read_text()).rows.tolist() == rec.rows.tolist()
    assert [p.name for p in tmp_path.iterdir()] == ["d.json"]
    with pytest.raises(OSError):
        write_output(rec, tmp_path / "missing" / "d.csv")
    assert [p.name for p in tmp_path.iterdir()] == ["d.json"]


# -- sweeps ------------------------------------------------------------------------

def test_sweep_mass_ratio(tmp_path):
    res = sweep(CAVITY_TEXT, "cavity.M", ["1e-11", "2e-11"], tmp_path / "m.csv", "density-scalar")
    assert [r.status for r in res] == [EXIT_OK, EXIT_OK]
    assert res[0].path.name == "m_1e-11.csv" and res[1].path.name == "m_2e-11.csv"
    light = parse_csv(res[0].path.read_text())
    heavy = parse_csv(res[1].path.read_text())
    col = light.columns.index("correction")
    np.testing.assert_array_equal(light.rows[:, col], 2 * heavy.rows[:, col])


def test_sweep_cutoff_three_curves(tmp_path):
    text = CAVITY_TEXT.replace("grid.start = 0", "grid.start = 9.8e-6").replace("grid.count = 9", "grid.count = 11")
    res = sweep(text, "cavity.omega_cut", ["6e15", "8e15", "1e16"], tmp_path / "c.csv", "density-scalar")
    means = [parse_csv(r.path.read_text()).rows[:, 2].mean() for r in res]
    assert means[0] < means[1] < means[2]
    assert [parse_csv(r.path.read_text()).metadata["cavity.mode_count"] for r in res] == ["63", "84", "106"]


def test_sweep_collects_failures(tmp_path):
    res = sweep(CAVITY_TEXT, "cavity.M", ["-1", "1e-11"], tmp_path / "m.csv", "density-scalar")
    assert res[0].status == EXIT_USAGE and res[0].path is None and "M" in res[0].error
    assert res[1].status == EXIT_OK


def test_sweep_empty():
    with pytest.raises(UsageError):
        sweep(CAVITY_TEXT, "cavity.M", [], "m.csv", "density-scalar")


def test_sweep_path():
    assert sweep_path("out/run.csv", "1e-11") == Path("out/run_1e-11.csv")


# -- command line ------------------------------------------------------------------

def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_main_success_and_determinism(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SCENARIO_TEXTS["density-scalar"])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["density-scalar", "--config", cfg, "--out", str(a), "--threads", "1"]) == EXIT_OK
    monkeypatch.setenv("CAVITYVAC_THREADS", "3")
    assert main(["density-scalar", "--config", cfg, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_main_stdout(tmp_path, capsys):
    cfg = _write(tmp_path, SCENARIO_TEXTS["dos"])
    assert main(["dos", "--config", cfg, "--format", "json"]) == EXIT_OK
    assert parse_json(capsys.readouterr().out).columns == ("omega", "dos")


def test_main_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, SCENARIO_TEXTS["dos"])
    assert main(["dos"]) == EXIT_USAGE
    assert main(["nonsense", "--config", good]) == EXIT_USAGE
    assert main(["dos", "--config", str(tmp_path / "none.cfg")]) == EXIT_IO
    bad = _write(tmp_path, CAVITY_TEXT.replace("grid.count = 9", "grid.count = 1"), "bad.cfg")
    assert main(["density-scalar", "--config", bad]) == EXIT_USAGE
    # a grid point exactly on the band edge has an infinite density of states
    edge = _write(tmp_path, SCENARIO_TEXTS["dos"].replace("2.9e15", "3e15").replace("grid.count = 40", "grid.count = 31"), "edge.cfg")
    assert main(["dos", "--config", edge]) == EXIT_NUMERICAL
    assert main(["dos", "--config", good, "--out", str(tmp_path / "no" / "x.csv")]) == EXIT_IO
    assert main(["dos", "--config", good, "--threads", "0"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "numerical error" in err and "I/O error" in err


def test_main_convergence_failure_exit(tmp_path, capsys):
    text = SCENARIO_TEXTS["resonance-crystal-in"] + "quadrature.panels = 1\nquadrature.order = 2\n" \
        "quadrature.levels = 2\nquadrature.rtol = 1e-14\n"
    cfg = _write(tmp_path, text)
    assert main(["resonance-crystal-in", "--config", cfg]) == EXIT_NUMERICAL
    assert "diagnostics" in capsys.readouterr().err


def test_main_sweep(tmp_path):
    cfg = _write(tmp_path, SCENARIO_TEXTS["density-scalar"])
    out = tmp_path / "s.csv"
    assert main(["density-scalar", "--config", cfg, "--out", str(out),
                 "--sweep", "cavity.M=1e-11,2e-11"]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.glob("s_*.csv")) == ["s_1e-11.csv", "s_2e-11.csv"]
    assert main(["density-scalar", "--config", cfg, "--out", str(out), "--sweep", "cavity.M="]) == EXIT_USAGE
    assert main(["density-scalar", "--config", cfg, "--out", str(out),
                 "--sweep", "cavity.M=-1,-2"]) == EXIT_USAGE
    assert main(["density-scalar", "--config", cfg, "--sweep", "cavity.M=1e-11"]) == EXIT_USAGE


def test_vacuum_pipeline_fit(tmp_path):
    cfg = _write(tmp_path, VACUUM)
    out = tmp_path / "v.csv"
    assert main(["resonance-vacuum", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rec = parse_csv(out.read_text())
    slope, _ = fit_far_zone_exponent(InteractionCurve(rec.rows[:, 0], rec.rows[:, 1], "vacuum"))
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_console_script(tmp_path):
    cfg = _write(tmp_path, SCENARIO_TEXTS["dos"])
    proc = subprocess.run([sys.executable, "-m", "cavityvac.cli", "dos", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].startswith("# scenario = dos")
