import json
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schauder_lab.cli import main
from schauder_lab.experiments import (IN_PROGRESS, MANIFEST, ChecksumError, ConfigError,
                                      ExperimentConfig, RunManifest, load_config, report, run,
                                      thread_count)
from schauder_lab.presets import PRESETS, preset_config
from schauder_lab.truncated_solver import Trajectory

HEAT = PRESETS["heat-1d"]["operator"]


def write_config(path, **kw):
    body = {"kind": "solve", "operator": HEAT, "h": 0.0625, "tau": 0.01, "radii": [4, 8, 16]}
    body.update(kw)
    path.write_text(json.dumps(body))
    return path


configs = st.builds(
    lambda kind, h, tau, radii, theta, seed, n: {
        "kind": kind, "operator": HEAT, "h": h, "tau": tau, "radii": radii, "theta": theta,
        "seed": seed, "n_ladder": n, "pairs": [{"alpha": 0.0, "beta": 1.5}],
        "datum": {"name": "gaussian", "width": 2.0}, "source": None},
    st.sampled_from(["check-hypotheses", "solve", "smoothing", "schauder", "mollify-study"]),
    st.floats(1e-4, 1.0), st.floats(1e-6, 1.0),
    st.lists(st.floats(0.5, 100), min_size=1, max_size=4),
    st.floats(0.01, 0.99), st.integers(0, 2**64 - 1),
    st.lists(st.floats(1, 1e4), min_size=1, max_size=5))


@given(configs)
def test_config_round_trip(body):
    cfg = ExperimentConfig.from_json(body)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert ExperimentConfig.from_json(cfg.dumps()) == cfg
    assert ExperimentConfig.from_json(cfg.dumps()).config_hash() == cfg.config_hash()


@pytest.mark.parametrize("bad", [
    {"kind": "dance"},
    {"h": -1.0},
    {"scheme": "leapfrog"},
    {"colour": "red"},
    {"theta": 1.0},
    {"operator": {"family": "affine", "N": 1}},
    {"pairs": [{"alpha": 0.0}]},
])
def test_schema_violations_raise(bad):
    body = {"kind": "solve", "operator": HEAT}
    body.update(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(body)


def test_cli_exit_2_on_config_errors(tmp_path, capsys):
    assert main(["solve", "--config", str(write_config(tmp_path / "a.json", h=-1))]) == 2
    assert main(["solve", "--config", str(write_config(tmp_path / "b.json",
                                                       datum="nope"))]) == 2
    assert main(["smoothing", "--config", str(write_config(tmp_path / "c.json"))]) == 2
    mutant = dict(PRESETS["sect4-example-mutant"]["operator"])
    mutant.pop("validate")
    assert main(["solve", "--config", str(write_config(tmp_path / "d.json",
                                                       operator=mutant))]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 2
    assert "config error" in capsys.readouterr().err


def test_zero_problem_gives_zero_trajectory(tmp_path):
    cfg = write_config(tmp_path / "zero.json", datum="zero", source="zero")
    out = tmp_path / "run"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    traj = Trajectory.load(out / "trajectory")
    assert np.all(traj.frames == 0)
    m = RunManifest.load(out)
    assert m.passed and m.kind == "solve"
    assert not (out / IN_PROGRESS).exists()


def test_relative_operator_path(tmp_path):
    (tmp_path / "op.json").write_text(json.dumps(HEAT))
    cfg = load_config(write_config(tmp_path / "c.json", operator="op.json"))
    assert os.path.isabs(cfg.operator)
    assert run(cfg, tmp_path / "run").passed


def test_identical_runs_have_identical_checksums(tmp_path):
    a = run(preset_config("ou-1d", "solve"), tmp_path / "a")
    b = run(preset_config("ou-1d", "solve"), tmp_path / "b")
    assert a.checksums() == b.checksums()
    assert a.config_hash == b.config_hash
    assert "stages.csv" in a.checksums()


def test_check_hypotheses_presets(tmp_path):
    assert main(["check-hypotheses", "--preset", "sect4-example-continuous",
                 "--out", str(tmp_path / "ok")]) == 0
    assert main(["check-hypotheses", "--preset", "sect4-example-mutant",
                 "--out", str(tmp_path / "bad")]) == 1
    rows = (tmp_path / "bad" / "stages.csv").read_text().splitlines()
    assert rows[0] == "stage,status,value,threshold,detail"
    assert any(",fail," in r for r in rows[1:])
    rep = json.loads((tmp_path / "bad" / "hypotheses.json").read_text())
    assert any(c["witness"] for c in rep["conditions"] if c["verdict"] == "fail")


def test_numerical_failure_exits_1_with_diagnostic_row(tmp_path):
    cfg = write_config(tmp_path / "c.json", datum={"name": "constant", "value": 1.0},
                       radii=[1, 2], tol=1e-12)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 1
    text = (tmp_path / "r" / "stages.csv").read_text()
    assert "ladder_convergence,fail" in text


def test_report_errors(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ChecksumError):
        report(empty)
    assert main(["report", str(empty)]) == 1
    out = tmp_path / "run"
    run(preset_config("heat-1d", "solve"), out)
    (out / "ladder.csv").write_text("tampered\n")
    with pytest.raises(ChecksumError, match="ladder.csv"):
        report(out)
    (out / MANIFEST).write_text("{not json")
    with pytest.raises(ChecksumError, match="corrupt"):
        report(out)


def test_interrupted_run_is_cleaned_and_foreign_dirs_refused(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / IN_PROGRESS).write_text("")
    (out / "half_written.csv").write_text("x\n")
    m = run(preset_config("heat-1d", "solve"), out)
    assert not (out / "half_written.csv").exists()
    assert "half_written.csv" not in m.checksums()
    foreign = tmp_path / "foreign"
    foreign.mkdir()
    (foreign / "notes.txt").write_text("keep me")
    with pytest.raises(ConfigError):
        run(preset_config("heat-1d", "solve"), foreign)
    assert (foreign / "notes.txt").read_text() == "keep me"


def test_thread_count_sources(monkeypatch):
    monkeypatch.delenv("SCHAUDER_LAB_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("SCHAUDER_LAB_THREADS", "3")
    assert thread_count() == 3
    assert thread_count(2) == 2


def smoothing_cfg():
    h = 1 / 512
    return preset_config("heat-1d", "smoothing", h=h, tau=5e-6, radii=(4.0,),
                         time_ladder=tuple(2.0 ** -k for k in range(5, 12)),
                         pairs=({"alpha": 0.0, "beta": 1.0,
                                 "datum": {"name": "tanh_step", "scale": 2 * h}},
                                {"alpha": 1.0, "beta": 2.0, "datum": "abs_gaussian"}))


def test_smoothing_run_is_thread_independent_and_reports_one_plot_per_pair(tmp_path):
    a = run(smoothing_cfg(), tmp_path / "a", threads=1)
    b = run(smoothing_cfg(), tmp_path / "b", threads=2)
    assert a.checksums() == b.checksums()
    assert a.passed
    fitted = {s["stage"]: float(s["value"]) for s in a.stages}
    assert abs(fitted["exponent_0_1"] - 0.5) <= 0.1
    paths = report(tmp_path / "a")
    svgs = sorted(p.name for p in paths if p.suffix == ".svg")
    assert svgs == ["smoothing_a0_b1.svg", "smoothing_a1_b2.svg"]
    assert (tmp_path / "a" / "report" / "smoothing_a0_b1.svg").read_text().startswith("<svg")
    report(tmp_path / "b")
    assert ((tmp_path / "a" / "report" / "smoothing_a0_b1.svg").read_bytes()
            == (tmp_path / "b" / "report" / "smoothing_a0_b1.svg").read_bytes())


def test_mollify_study_report_plumbing(tmp_path):
    cfg = preset_config("two-stage-heat", "mollify-study", h=0.0625, tau=0.01,
                        n_ladder=(4.0, 16.0), radii=(8.0, 16.0, 32.0))
    m = run(cfg, tmp_path / "m")
    assert "convergence.csv" in m.checksums()
    names = [p.name for p in report(tmp_path / "m")]
    assert "increments.svg" in names and "summary.txt" in names


def test_schauder_cli_with_theta_override(tmp_path, capsys):
    code = main(["schauder", "--preset", "heat-forced", "--theta", "0.25", "--mesh-h", "0.0625",
                 "--tau", "0.005", "--out", str(tmp_path / "s")])
    assert code == 0
    rows = (tmp_path / "s" / "schauder.csv").read_text().splitlines()
    assert rows[0] == "theta,norm_f,norm_g,sup_norm_u_c2theta,ratio,h,tau"
    assert rows[1].startswith("0.25,")
    assert "voc.csv" in RunManifest.load(tmp_path / "s").checksums()


def test_print_config_and_presets_listing(capsys):
    assert main(["solve", "--preset", "ou-1d", "--print-config", "--radius-ladder",
                 "2,4"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["radii"] == [2.0, 4.0] and body["preset"] == "ou-1d"
    assert main(["presets"]) == 0
    assert "two-stage-heat" in capsys.readouterr().out
