import json

import pytest

from fellerlab import cli
from fellerlab.config import defaults_text, load_file, parse_text, resolve
from fellerlab.errors import SpecValidationError
from fellerlab.experiments import CATALOG, list_experiments
from fellerlab.report import VerificationReport, emit_census_histogram, emit_plot_data, run_experiment

SMALL_MC = ["--set", "n_paths=300", "--set", "dt=1e-4"]


# --- config ---------------------------------------------------------------------------

def test_parse_text_and_comments():
    d = parse_text("seed = 4\n# comment\n interval-feller-mc.n_paths = 10  # trailing\n\n")
    assert d == {"seed": "4", "interval-feller-mc.n_paths": "10"}
    with pytest.raises(SpecValidationError):
        parse_text("no equals sign")


def test_resolve_coerces_and_scopes():
    seed, params = resolve(["interval-feller-mc", "circle-arc-census"],
                           {"seed": "9", "dt": "2e-4", "circle-arc-census.n_paths": "1e3"})
    assert seed == 9
    assert params["interval-feller-mc"]["dt"] == 2e-4
    assert params["circle-arc-census"]["n_paths"] == 1000
    assert params["interval-feller-mc"]["n_paths"] == CATALOG["interval-feller-mc"].defaults["n_paths"]


@pytest.mark.parametrize("bad", [{"nonsense": "1"}, {"dt": "fast"}, {"seed": "x"},
                                 {"no-such-exp.dt": "1"}, {"interval-feller-mc.nope": "1"}])
def test_resolve_rejects_bad_values(bad):
    with pytest.raises(SpecValidationError):
        resolve(["interval-feller-mc"], bad)


def test_defaults_text_round_trips():
    d = parse_text(defaults_text())
    seed, params = resolve(list(CATALOG), d)
    for name, spec in CATALOG.items():
        assert params[name] == spec.defaults


# --- catalog ----------------------------------------------------------------------------

def test_catalog_covers_acceptance_criteria():
    assert {s.acceptance for s in CATALOG.values()} >= set(range(1, 10))
    assert all(s.ref for s in CATALOG.values())


def test_list_filters():
    circle = list_experiments("circle")
    assert circle and all(s.geometry == "circle" for s in circle)
    assert list_experiments("torus") == []


def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "douglas-disk-n3" in out and out.count("\n") == len(CATALOG)
    assert cli.main(["list", "--geometry", "torus"]) == 0
    assert capsys.readouterr().out == ""
    cli.main(["list", "--acceptance"])
    assert "ball-douglas" not in capsys.readouterr().out


# --- reports ----------------------------------------------------------------------------

def test_deterministic_report(tmp_path):
    rep = run_experiment("douglas-disk-n3", seed=3, out_dir=tmp_path)
    assert rep.passed
    path = tmp_path / "douglas-disk-n3-3.json"
    d = json.loads(path.read_text())
    assert d["status"] == "PASS" and d["seed"] == 3 and d["config"]["modes"] == "3"
    assert d["targets"]["douglas_integral cos 3"]["provenance"].startswith("DERIVED")
    assert VerificationReport.load(path).values == rep.values


def test_failing_check_gives_fail():
    rep = run_experiment("douglas-disk-n3", {"modes": "3", "rtol": 1e-18})
    assert rep.status == "FAIL"


def test_plot_data_u_alpha_curve(tmp_path):
    rep = run_experiment("interval-monotone", seed=1, out_dir=tmp_path)
    files = emit_plot_data(tmp_path / rep.filename())
    rows = [list(map(float, line.split())) for line in files[0].read_text().splitlines()[1:]]
    vals = [r[1] for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert abs(vals[-1] - 0.5) < 0.02


def test_empty_census_histogram_is_header_only(tmp_path):
    path = emit_census_histogram(tmp_path / "h.dat", [], [], [])
    assert path.read_text() == "# bin empirical analytic ci_lo ci_hi\n"


# --- run subcommand ----------------------------------------------------------------------

def test_run_exit_code_and_output(tmp_path, capsys):
    assert cli.main(["run", "douglas-disk-n3", "--out", str(tmp_path), "--seed", "2"]) == 0
    assert (tmp_path / "douglas-disk-n3-2.json").exists()
    assert cli.main(["run", "douglas-disk-n3", "--out", str(tmp_path), "--set", "rtol=1e-18"]) == 1


def test_malformed_spec_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "douglas-disk-n3", "--out", str(out), "--set", "rtol=abc"]) == 2
    assert cli.main(["run", "interval-feller-mc", "--out", str(out), "--set", "dt=0"]) == 2
    assert cli.main(["run", "exterior-escape-hemisphere", "--out", str(out), "--set", "geometry=disk"]) == 2
    assert cli.main(["run", "no-such-experiment", "--out", str(out)]) == 2
    assert not out.exists()
    assert "invalid specification" in capsys.readouterr().err


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FELLERLAB_OUT", str(tmp_path / "env"))
    assert cli.main(["run", "interval-trace-energy"]) == 0
    assert (tmp_path / "env" / "interval-trace-energy-1.json").exists()


def test_mc_report_reproducible_from_config_echo(tmp_path):
    first = tmp_path / "a"
    assert cli.main(["run", "interval-feller-mc", "--out", str(first), "--seed", "5",
                     "--set", "max_rel_half_width=1.0", *SMALL_MC]) in (0, 1)
    report = first / "interval-feller-mc-5.json"
    assert sorted(p.name for p in first.iterdir()) == ["interval-feller-mc-5-excursions.csv",
                                                        "interval-feller-mc-5.json"]
    again = tmp_path / "b"
    cli.main(["run", "interval-feller-mc", "--config", str(report), "--out", str(again)])
    a = json.loads(report.read_text())
    b = json.loads((again / "interval-feller-mc-5.json").read_text())
    assert a["values"]["estimate"]["value"] == b["values"]["estimate"]["value"]
    assert a["config"] == b["config"]
    assert load_file(report)["seed"] == "5"


def test_jump_census_report_has_histogram(tmp_path):
    rep = run_experiment("circle-jump-census", {**CATALOG["circle-jump-census"].defaults, "n_paths": 300,
                                                "dt": 1e-4, "record_paths": 1}, seed=2, out_dir=tmp_path)
    files = emit_plot_data(rep, tmp_path)
    text = files[0].read_text().splitlines()
    assert text[0] == "# bin empirical analytic ci_lo ci_hi"
    assert len(text) == 1 + 9
    assert (tmp_path / "circle-jump-census-2-jumps.csv").exists()


def test_parallel_jobs(tmp_path, capsys):
    assert cli.main(["run", "acceptance", "--out", str(tmp_path), "--jobs", "2",
                     "--set", "n_paths=200", "--set", "dt=1e-4", "--set", "dts=4e-4,1e-4",
                     "--set", "zero_paths=20", "--set", "window=0.02"]) in (0, 1)
    names = {p.name for p in tmp_path.glob("*.json")}
    assert len(names) == len([s for s in CATALOG.values() if s.acceptance])
