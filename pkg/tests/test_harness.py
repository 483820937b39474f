"""Experiment harness: configs, runs, ladders, lemma suite, CLI contract."""

import json
import os

import pytest

from confinedbose.cli import main
from confinedbose.errors import ConfigError, GuardError
from confinedbose.harness import (
    ExperimentConfig,
    fit_rate,
    run_ladder,
    run_single,
    verify_lemmas,
)

BASE = {
    "regime": "hartree-theta0",
    "free": {"extents": [12.0], "points": [16]},
    "confined": {"intervals": [[-0.5, 0.5]], "points": [3], "eps": 0.5},
    "interaction": {"kind": "gaussian-bump", "amplitude": 1.5, "radius": 2.4, "sigma": 0.8},
    "n_particles": 2,
    "initial": {"kind": "gaussian", "width": 0.8},
    "time_horizon": 0.05,
    "dt": 5e-3,
    "report_stride": 5,
    "seed": 7,
}


def config(**overrides):
    return ExperimentConfig.from_dict({**BASE, **overrides})


def test_config_round_trip_identity(tmp_path):
    cfg = config()
    path = tmp_path / "cfg.json"
    path.write_text(cfg.dumps(), encoding="utf-8")
    again = ExperimentConfig.load(path)
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_config_rejects_unknown_fields():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, "bogus": 1})


def test_run_single_zero_interaction_alpha_series(tmp_path):
    cfg = config(interaction={"kind": "gaussian-bump", "amplitude": 0.0,
                              "radius": 1.5, "sigma": 0.5})
    summary = run_single(cfg, tmp_path / "run")
    assert max(abs(a) for a in summary["alphas"]) < 1e-10
    for name in ("onebody.csv", "manybody.csv", "counting.csv", "counting.json",
                 "final_onebody.mfl1", "final_manybody.mfl1", "run_meta.json"):
        assert (tmp_path / "run" / name).exists()
    meta = json.loads((tmp_path / "run" / "run_meta.json").read_text())
    assert meta["prefactor_convention"] == "1/(N-1)"


def test_run_single_deterministic_outputs(tmp_path):
    cfg = config()
    run_single(cfg, tmp_path / "a")
    run_single(cfg, tmp_path / "b")
    for name in ("onebody.csv", "manybody.csv", "counting.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_single_memory_guard(tmp_path):
    cfg = config(memory_cap_bytes=1000)
    with pytest.raises(GuardError):
        run_single(cfg, tmp_path / "run")


def test_fit_rate_contracts():
    few = fit_rate((2, 3), (0.1, 0.05))
    assert few.slope is None and "fewer" in few.note

    degenerate = fit_rate((2, 3, 4), (0.0, 0.0, 0.0))
    assert degenerate.slope is None and "degenerate" in degenerate.note

    clean = fit_rate((2, 3, 4), [1.0 / n for n in (2, 3, 4)])
    assert clean.slope == pytest.approx(-1.0, abs=1e-12)
    assert clean.residual < 1e-12

    noisy = fit_rate((2, 3, 4), (0.1, 0.9, 0.05))
    assert noisy.slope is None and "withheld" in noisy.note


def test_run_ladder_zero_interaction_degenerate(tmp_path):
    cfg = config(
        free={"extents": [16.0], "points": [8]},
        interaction={"kind": "gaussian-bump", "amplitude": 0.0, "radius": 1.5, "sigma": 0.5},
        ladder={"particle_counts": [2, 3, 4], "eps_rule": "fixed"},
        time_horizon=0.02, dt=5e-3, report_stride=4,
    )
    fit = run_ladder(cfg, tmp_path / "ladder")
    assert fit.complete
    assert fit.slope is None and "degenerate" in fit.note
    assert (tmp_path / "ladder" / "rate_fit.json").exists()
    assert (tmp_path / "ladder" / "plot_ladder.py").exists()


def test_run_ladder_worker_pool_matches_sequential(tmp_path):
    cfg = config(
        free={"extents": [16.0], "points": [8]},
        interaction={"kind": "gaussian-bump", "amplitude": 1.0, "radius": 6.2, "sigma": 1.6},
        ladder={"particle_counts": [2, 3, 4], "eps_rule": "fixed"},
        time_horizon=0.04, dt=1e-2, report_stride=4,
    )
    seq = run_ladder(cfg, tmp_path / "seq", workers=1)
    par = run_ladder(cfg, tmp_path / "par", workers=2)
    assert seq.complete and par.complete
    assert seq.terminal_values == par.terminal_values
    assert seq.slope == par.slope


def test_run_ladder_dt_sensitivity(tmp_path):
    # halving the step perturbs terminal values within the O(dt^2) budget
    # and moves the fitted slope by well under 0.05
    base = dict(
        free={"extents": [16.0], "points": [8]},
        interaction={"kind": "gaussian-bump", "amplitude": 2.0, "radius": 6.2, "sigma": 1.6},
        ladder={"particle_counts": [2, 3, 4], "eps_rule": "fixed"},
        time_horizon=0.4, report_stride=100,
    )
    slopes = {}
    for dt in (1e-2, 5e-3):
        fit = run_ladder(config(dt=dt, **base), tmp_path / f"dt{dt}")
        assert fit.slope is not None
        slopes[dt] = fit.slope
    assert abs(slopes[1e-2] - slopes[5e-3]) <= 0.05


def test_run_ladder_requires_three_points(tmp_path):
    cfg = config(ladder={"particle_counts": [2, 3], "eps_rule": "fixed"})
    with pytest.raises(ConfigError):
        run_ladder(cfg, tmp_path / "ladder")


def test_verify_lemmas_pass_and_seed_stability():
    checks_a = verify_lemmas(seed=1, particle_counts=(2, 3), n_states=4)
    checks_b = verify_lemmas(seed=99, particle_counts=(2, 3), n_states=4)
    assert all(c.passed for c in checks_a)
    outcomes_a = {c.name: c.passed for c in checks_a}
    outcomes_b = {c.name: c.passed for c in checks_b}
    assert outcomes_a == outcomes_b


def test_verify_lemmas_negative_control():
    checks = verify_lemmas(seed=1, particle_counts=(2,), n_states=2, corruption="phi-norm")
    by_name = {c.name: c for c in checks}
    assert not by_name["reference-normalization"].passed


# -- CLI ------------------------------------------------------------------------


def write_config(tmp_path, **overrides):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({**BASE, **overrides}), encoding="utf-8")
    return str(path)


def test_cli_requires_config(tmp_path):
    assert main(["counting", "--out", str(tmp_path / "o")]) == 4


def test_cli_bad_config_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["counting", "--config", str(path), "--out", str(tmp_path / "o")]) == 4


def test_cli_simulate_and_counting(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["counting", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "counting.csv").exists()
    out2 = tmp_path / "ob"
    assert main(["simulate-onebody", "--config", cfg, "--out", str(out2)]) == 0
    assert (out2 / "onebody.csv").exists()
    out3 = tmp_path / "mb"
    assert main(["simulate-manybody", "--config", cfg, "--out", str(out3)]) == 0
    assert (out3 / "manybody.csv").exists()
    assert not (out3 / "counting.csv").exists()


def test_cli_guard_exit_code(tmp_path):
    cfg = write_config(tmp_path, memory_cap_bytes=1000)
    assert main(["counting", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_cli_verify_lemmas(tmp_path):
    out = tmp_path / "v"
    assert main(["verify-lemmas", "--out", str(out), "--seed", "3"]) == 0
    table = json.loads((out / "verify_lemmas.json").read_text())
    assert all(entry["passed"] for entry in table.values())


def test_cli_coulomb_norms(tmp_path):
    eps_cfg = tmp_path / "eps.json"
    eps_cfg.write_text(json.dumps({"eps_list": [0.1]}), encoding="utf-8")
    out = tmp_path / "c"
    assert main(["coulomb-norms", "--config", str(eps_cfg), "--out", str(out)]) == 0
    rows = json.loads((out / "coulomb_norms.json").read_text())
    assert rows[0]["linf_defect"] <= 0.01


def test_cli_bounds_hartree(tmp_path):
    cfg = write_config(tmp_path, time_horizon=0.05, dt=5e-3, report_stride=2)
    out = tmp_path / "b"
    assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "bounds.json").read_text())
    assert report["regime"] == "mean-field"
    assert report["below_envelope"] is True
