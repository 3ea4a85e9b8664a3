import json

import pytest

from wavetraj import cli
from wavetraj.errors import ConfigParse

SHORT = ["--set", "z_end_over_zr=0.05", "--set", "n_rays=41"]


def test_config_parsing():
    text = "# comment\nfront.n_rays = 101   # trailing\n\nE_over_V0=0.5\n"
    assert cli.parse_config_text(text) == {"front.n_rays": "101", "E_over_V0": "0.5"}
    with pytest.raises(ConfigParse):
        cli.parse_config_text("just words\n")
    with pytest.raises(ConfigParse):
        cli.parse_sets(["novalue"])


def test_set_wins_over_config_and_flags(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n_rays = 101\nworkers = 2\n")
    args = cli.build_parser().parse_args(
        ["run", "free_gaussian", "--config", str(cfg), "--workers", "3", "--set", "n_rays=51",
         "--strict-eq29"])
    merged = cli.collect_overrides(args)
    assert merged["n_rays"] == "51" and merged["workers"] == "3"
    assert merged["strict_projection"] == "true"


def test_run_writes_artefacts(tmp_path, capsys):
    out = tmp_path / "f1"
    assert cli.main(["run", "free_gaussian", "--out", str(out), "--plot", *SHORT]) == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"trajectories.csv", "metrics.csv", "summary.json", "manifest.json",
                     "trajectories.svg", "intensity.svg"}
    summary = json.loads((out / "summary.json").read_text())
    for key in ("scenario", "epsilon", "n_rays", "dt", "termination", "events", "oracles",
                "max_H_drift", "max_flux_deviation"):
        assert key in summary
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == names - {"manifest.json"}
    assert manifest["config"]["numerics"]["n_rays"] == 41


def test_runs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["run", "free_gaussian", "--out", str(tmp_path / d), *SHORT]) == 0
    for name in ("trajectories.csv", "metrics.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_reproduces_run(tmp_path):
    assert cli.main(["run", "free_gaussian", "--out", str(tmp_path / "a"), *SHORT]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    sets = [x for k, v in manifest["overrides"].items() for x in ("--set", f"{k}={v}")]
    assert cli.main(["run", manifest["scenario"], "--out", str(tmp_path / "b"), *sets]) == 0
    assert (tmp_path / "a" / "trajectories.csv").read_bytes() == \
        (tmp_path / "b" / "trajectories.csv").read_bytes()


def test_barrier_run_reports_turning(tmp_path):
    out = tmp_path / "b05"
    assert cli.main(["run", "barrier", "--set", "E_over_V0=0.5", "--set", "n_rays=41",
                     "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    turning = [e for e in summary["events"] if e["kind"] == "turning"]
    assert turning and summary["oracles"]["turning"]["rel_err"] <= 0.01


def test_unknown_scenario_exit_code(tmp_path):
    out = tmp_path / "x"
    assert cli.main(["run", "nosuch", "--out", str(out)]) == 2
    err = json.loads((out / "summary.json").read_text())["error"]
    assert err["code"] == "UnknownScenario"


def test_bad_override_exit_code(tmp_path):
    assert cli.main(["run", "free_gaussian", "--set", "bogus=1", "--out", str(tmp_path)]) == 2


def test_missing_config_exit_code(tmp_path):
    assert cli.main(["run", "free_gaussian", "--config", str(tmp_path / "none.cfg")]) == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "free_gaussian", "--workers", "0"])
    assert exc.value.code == 2


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("free_gaussian", "twin_gaussian", "constant_force", "barrier", "step", "lens",
                 "harmonic", "classical_vacuum"):
        assert name in out


def test_plot(tmp_path):
    assert cli.main(["run", "free_gaussian", "--out", str(tmp_path), *SHORT]) == 0
    svg = tmp_path / "p.svg"
    assert cli.main(["plot", str(tmp_path / "trajectories.csv"), "--out", str(svg)]) == 0
    assert svg.read_text().count('class="envelope"') == 2


def test_plot_errors(tmp_path):
    assert cli.main(["plot", str(tmp_path / "none.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    assert cli.main(["plot", str(bad)]) == 2


def test_verify_unknown_check():
    assert cli.main(["verify", "nosuch"]) == 2


def test_verify_single_check(tmp_path, capsys):
    assert cli.main(["verify", "step", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report[0]["name"] == "step" and report[0]["passed"]
    assert "[PASS]" in capsys.readouterr().out


def test_verify_failure_exit_code():
    # a coarse beam with the literal projection factor never diffracts
    assert cli.main(["verify", "envelope", "--strict-eq29", "--set", "n_rays=41"]) == 3
