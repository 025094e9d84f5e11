import json
import os
import subprocess
import sys

import numpy as np
import pytest

from limebsi.cli import main, read_csv
from limebsi.config import ConfigError, config_from_dict, load_config

SMALL = """
problem = "{problem}"
seed = 3

[chains]
n_chains = 2
n_steps = 3000

[analysis]
n_trajectories = 10
kde_points = 64
time_points = 20
joint_bins = 20
"""


def cfg_file(tmp_path, problem="I", extra=""):
    p = tmp_path / f"{problem}.toml"
    p.write_text(SMALL.format(problem=problem) + extra)
    return str(p)


def test_simulate_writes_dataset(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg_file(tmp_path), "--out", str(out)]) == 0
    truth = json.loads((out / "truth.json").read_text())
    assert truth["lam"] == 0.98 and truth["seed"] == 3
    assert set(json.loads((out / "conditions.json").read_text())) == {"theta0_obs", "theta_air_obs"}
    header, rows = read_csv(out / "data.csv")
    assert header == ["time", "temp_c"] and rows.shape == (20, 2)


def test_infer_problem_I_bundle(tmp_path):
    out = tmp_path / "run"
    code = main(["infer", "--config", cfg_file(tmp_path), "--out", str(out)])
    assert code in (0, 3)
    for name in ("samples.csv", "diagnostics.json", "summary.json", "data.csv", "kde_lam.csv", "trajectories.csv", "residuals.csv"):
        assert (out / name).exists(), name
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["params"]) == {"lam", "theta0", "theta_air", "sigma"}
    lam = summary["params"]["lam"]
    assert lam["ci_lower"] < lam["mean"] < lam["ci_upper"]
    header, kde = read_csv(out / "kde_lam.csv")
    assert header == ["x", "posterior", "prior"]
    assert np.trapezoid(kde[:, 1], kde[:, 0]) == pytest.approx(1.0, abs=0.01)
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["converged"] == (code == 0)


def test_infer_from_simulated_directory(tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--config", cfg_file(tmp_path), "--out", str(sim)])
    out = tmp_path / "fit"
    assert main(["infer", "--config", cfg_file(tmp_path), "--data", str(sim), "--out", str(out)]) in (0, 3)
    summary = json.loads((out / "summary.json").read_text())
    measured = json.loads((sim / "conditions.json").read_text())
    assert summary["measured"] == measured


def test_infer_IIb_writes_joint_and_curve(tmp_path):
    out = tmp_path / "b"
    assert main(["infer", "--config", cfg_file(tmp_path, "IIb"), "--out", str(out)]) in (0, 3)
    header, joint = read_csv(out / "joint_t0_theta0.csv")
    assert header == ["t0", "theta0", "posterior", "prior"]
    assert joint.shape == (400, 4)
    _, curve = read_csv(out / "classical_curve.csv")
    assert np.all(curve[:, 0] < 1.0)
    assert np.all(np.diff(curve[:, 1]) > 0)  # lime warms: earlier start means colder


def test_sweep_command(tmp_path):
    out = tmp_path / "sw"
    extra = "\n[sweep]\nt_prime_factors = [0.5, 2.0]\n"
    assert main(["sweep", "--config", cfg_file(tmp_path, "IIa", extra), "--out", str(out)]) in (0, 3)
    header, rows = read_csv(out / "sweep.csv")
    assert header[:4] == ["t_prime", "theta_prime_obs", "theta0_mean", "theta0_std"]
    assert rows[:, 0] == pytest.approx([0.49, 1.96])
    assert rows[0, 3] < rows[1, 3]


def test_infer_is_byte_identical(tmp_path):
    cfg = cfg_file(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["infer", "--config", cfg, "--out", str(a)])
    main(["infer", "--config", cfg, "--out", str(b)])
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_seed_flag_changes_output(tmp_path):
    cfg = cfg_file(tmp_path)
    main(["infer", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["infer", "--config", cfg, "--seed", "4", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "b" / "samples.csv").read_bytes()


def test_invalid_config_exits_1_and_writes_nothing(tmp_path, capsys):
    out = tmp_path / "nothing"
    bad = cfg_file(tmp_path, extra='\n[priors.lam]\nfamily = "normal"\nmu = 1.0\nsigma = -1.0\n')
    assert main(["infer", "--config", bad, "--out", str(out)]) == 1
    assert not out.exists()
    assert "priors.lam" in capsys.readouterr().err


def test_missing_data_file_exits_1(tmp_path):
    out = tmp_path / "nothing"
    assert main(["infer", "--config", cfg_file(tmp_path), "--data", str(tmp_path / "nope.csv"), "--out", str(out)]) == 1
    assert not out.exists()


def test_not_converged_exits_3(tmp_path):
    out = tmp_path / "short"
    # tiny, badly scaled chains cannot agree
    extra_chains = SMALL.format(problem="IIb").replace("n_steps = 3000", "n_steps = 40\nadapt = false\ninitial_step_scales = [1e-6, 1e-6, 1e-6, 1e-6, 1e-6]")
    p = tmp_path / "short.toml"
    p.write_text(extra_chains)
    assert main(["infer", "--config", str(p), "--out", str(out)]) == 3
    assert (out / "samples.csv").exists()


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["infer", "--problem", "III"])
    assert exc.value.code == 2


def test_convert_and_diagnose(tmp_path, capsys):
    src = tmp_path / "t.csv"
    src.write_text("time,temp_c\n0,5\n1,15\n")
    assert main(["convert", str(src), "--direction", "t2r"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "time,resistance_ohm"
    assert float(out[1].split(",")[1]) == pytest.approx(1019.5270625, abs=1e-9)

    run = tmp_path / "run"
    main(["infer", "--config", cfg_file(tmp_path), "--out", str(run)])
    capsys.readouterr()
    diag_out = tmp_path / "diag"
    code = main(["diagnose", str(run / "samples.csv"), "--out", str(diag_out)])
    assert code in (0, 3)
    header, trace = read_csv(diag_out / "trace.csv")
    assert header[:3] == ["step", "lam_chain0", "lam_chain1"]
    assert trace.shape == (1500, 1 + 4 * 2)
    assert json.loads(capsys.readouterr().out)["rhat"].keys() == {"lam", "theta0", "theta_air", "sigma"}


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"chains": {"n_chainz": 2}})
    with pytest.raises(ConfigError):
        config_from_dict({"problem": "III"})
    cfg = config_from_dict({"seed": 11})
    assert cfg.chains.seed == 11
    p = tmp_path / "c.toml"
    p.write_text('seed = 1\n[chains]\nseed = 5\n')
    assert load_config(p).chains.seed == 5
    assert load_config(p, seed=9).chains.seed == 9


def test_module_entry_point_runs():
    r = subprocess.run([sys.executable, "-m", "limebsi.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout


def test_outputs_round_trip_through_readers(tmp_path):
    from limebsi.ingest import load_timeseries
    from limebsi.sampler import SampleSet

    out = tmp_path / "run"
    main(["infer", "--config", cfg_file(tmp_path), "--out", str(out)])
    text = (out / "samples.csv").read_text()
    assert SampleSet.from_csv(out / "samples.csv").to_csv() == text
    obs = load_timeseries(out / "data.csv")
    summary = json.loads((out / "summary.json").read_text())
    assert len(obs) == summary["n_observations"] == 20
    for name in summary["params"]:
        _, kde = read_csv(out / f"kde_{name}.csv")
        assert np.all(kde[:, 1] >= 0)
        assert np.trapezoid(kde[:, 1], kde[:, 0]) == pytest.approx(1.0, abs=1e-3)


def test_simulate_deterministic_and_noiseless(tmp_path):
    from limebsi.forward_model import ExperimentConditions, ModelParams, lime_temperature

    cfg = cfg_file(tmp_path, extra="\n[synthesis]\nsigma = 1e-12\n")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", cfg, "--out", str(a)])
    main(["simulate", "--config", cfg, "--out", str(b)])
    for n in ("data.csv", "conditions.json", "truth.json"):
        assert (a / n).read_bytes() == (b / n).read_bytes()
    _, rows = read_csv(a / "data.csv")
    exact = lime_temperature(rows[:, 0], ModelParams(0.98), ExperimentConditions(0.0, 5.0, 20.0))
    np.testing.assert_allclose(rows[:, 1], exact, atol=1e-10)
    assert rows[0, 0] == 0.0 and rows[-1, 0] == pytest.approx(4 * 0.98)
