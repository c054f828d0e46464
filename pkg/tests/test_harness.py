import json

import numpy as np
import pytest

from cmdp_lab.algorithms import NO_ADJUSTMENT, UOPT, AlgoVariant, EXPERIMENT_SCHEDULE
from cmdp_lab.env import generate_random_cmdp
from cmdp_lab.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    emit_chart,
    format_row,
    read_run_csv,
    run_experiment,
    run_single,
)
from cmdp_lab.oracle import solve_cmdp_lp

ENV = {"seed": 3, "states": 5, "actions": 2, "horizon": 3}


def _config(tmp_path, **kw):
    d = {"env": ENV, "variants": [UOPT, NO_ADJUSTMENT], "episodes": 40, "seeds": [0, 1],
         "output_dir": "out"}
    d.update(kw)
    return ExperimentConfig.from_dict(d, base_dir=tmp_path)


def test_format_row_uses_round_trip_precision():
    row = format_row(3, UOPT, 0, 0.1, 0.0, 1 / 3, 0.0, 2.0, 0.5, 0.25)
    fields = row.strip().split(",")
    assert fields[:3] == ["3", UOPT, "0"]
    assert float(fields[5]) == 1 / 3 and fields[5] == "0.33333333333333331"


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"env": {}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"env": ENV, "variants": ["Bogus"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"env": ENV, "delta": 0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"env": ENV, "colour": "red"})
    with pytest.warns(UserWarning):
        ExperimentConfig.from_dict({"env": ENV, "schedule": {"alpha_eta": 0.3, "alpha_tau": 0.6}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_run_experiment_outputs(tmp_path):
    manifest_path = run_experiment(_config(tmp_path))
    manifest = json.loads(manifest_path.read_text())
    assert len(manifest["runs"]) == 4
    out = tmp_path / "out"
    assert (out / "env.json").exists()
    for run in manifest["runs"]:
        text = (out / run["csv"]).read_text().splitlines()
        assert text[0] == CSV_HEADER
        assert len(text) == 41
        cols = read_run_csv(out / run["csv"])
        assert cols["algo"] == run["algo"]
        assert np.all(np.diff(cols["regret_opt"]) >= 0)
        assert abs(cols["opt_gap"].sum() - run["regret_opt"]) <= 1e-9
        assert abs(cols["violation"].sum() - run["regret_vio"]) <= 1e-9
        grid = sorted(float(e) for e in run["mistakes_opt"])
        for key in ("mistakes_opt", "mistakes_vio"):
            counts = [run[key][str(e)] for e in grid]
            assert counts == sorted(counts, reverse=True)
    svg = emit_chart([out / r["csv"] for r in manifest["runs"]], tmp_path / "fig.svg")
    again = emit_chart([out / r["csv"] for r in manifest["runs"]], tmp_path / "fig2.svg")
    assert svg.read_bytes() == again.read_bytes()
    text = svg.read_text()
    assert "<svg" in text
    for label in (UOPT, NO_ADJUSTMENT):
        assert text.count(f"{label} (seed 0)") == 1


def test_env_from_file(tmp_path):
    cmdp, _ = generate_random_cmdp(1, 4, 2, 3)
    cmdp.save(tmp_path / "env.json")
    cfg = _config(tmp_path, env={"path": "env.json"}, variants=[UOPT], seeds=[0], episodes=5)
    manifest = json.loads(run_experiment(cfg).read_text())
    assert manifest["slater_gap"] == pytest.approx(cmdp.thresholds[0])


def test_parallel_matches_sequential(tmp_path):
    seq = tmp_path / "seq"
    par = tmp_path / "par"
    run_experiment(_config(seq, episodes=20))
    run_experiment(_config(par, episodes=20, workers=2))
    for f in sorted((seq / "out").glob("*.csv")):
        assert f.read_bytes() == (par / "out" / f.name).read_bytes()


def test_checkpoint_resume_is_byte_identical(tmp_path):
    cmdp, gap = generate_random_cmdp(2, 5, 2, 3)
    v_star = solve_cmdp_lp(cmdp)[0]
    variant = AlgoVariant(UOPT)
    args = (cmdp, variant, 0, EXPERIMENT_SCHEDULE, gap, v_star, 60)
    full = tmp_path / "full.csv"
    run_single(*args, full, bonus_scale=1e-3)
    part = tmp_path / "part.csv"
    run_single(*args, part, bonus_scale=1e-3, checkpoint_every=10, stop_after=37)
    # the tail written after the last checkpoint is discarded on resume
    run_single(*args, part, bonus_scale=1e-3, checkpoint_every=10, resume=True)
    assert part.read_bytes() == full.read_bytes()


def test_chart_needs_runs(tmp_path):
    with pytest.raises(ValueError):
        emit_chart([], tmp_path / "x.svg")
