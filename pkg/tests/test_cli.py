import csv
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from pattern_locate.channel import mean_rssi
from pattern_locate.cli import SEED_ENV, main
from pattern_locate.config import KEYS, load_config

PRESETS = Path(__file__).resolve().parent.parent / "presets"


def write_config(tmp_path, text, name="scenario.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


def test_simulate_noiseless_matches_model(tmp_path):
    cfg = write_config(tmp_path, "sigma_db = 0\nd0_m = 3.0\ntheta0_deg = -12.5\n")
    assert main(["simulate", "-c", str(cfg), "-o", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "measurements.csv")
    scenario = load_config(cfg).scenario()
    expect = mean_rssi(scenario, np.array([float(r["delta_phi_deg"]) for r in rows]))
    assert np.allclose([float(r["rssi_dbm"]) for r in rows], expect, rtol=0, atol=1e-12)
    assert [int(r["index"]) for r in rows] == list(range(1, 9))


def test_simulate_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.toml"
    assert main(["simulate", "-c", str(missing), "-o", str(tmp_path)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, "snr_db = 5\nseed = 17\n")
    main(["simulate", "-c", str(cfg), "-o", str(tmp_path / "a")])
    main(["simulate", "-c", str(cfg), "-o", str(tmp_path / "b")])
    a = (tmp_path / "a" / "measurements.csv").read_bytes()
    assert a == (tmp_path / "b" / "measurements.csv").read_bytes()
    main(["simulate", "-c", str(cfg), "-o", str(tmp_path / "c"), "--seed", "18"])
    assert a != (tmp_path / "c" / "measurements.csv").read_bytes()


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, "snr_db = 5\nseed = 1\n")

    def run(out, *extra):
        main(["simulate", "-c", str(cfg), "-o", str(tmp_path / out), *extra])
        return (tmp_path / out / "measurements.csv").read_bytes()

    base = run("cfg")
    flag = run("flag", "--seed", "9")
    monkeypatch.setenv(SEED_ENV, "9")
    env = run("env")
    both = run("both", "--seed", "1")
    assert env == flag and env != base
    assert both == base


def test_bad_env_seed_is_config_error(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "abc")
    assert main(["simulate", "-o", str(tmp_path)]) == 2


@pytest.mark.parametrize("method", ["cid", "eqsolve", "mle"])
def test_estimate_noiseless_recovers_truth(tmp_path, capsys, method):
    cfg = write_config(tmp_path, "sigma_db = 0\nd0_m = 2.7\ntheta0_deg = 21.0\n")
    main(["simulate", "-c", str(cfg), "-o", str(tmp_path)])
    if method == "mle":
        # the likelihood needs a sigma; its value does not move the noiseless argmax
        extra = ["--set", "sigma_db=1.0"]
    else:
        extra = []
    code = main(["estimate", str(tmp_path / "measurements.csv"), "-m", method, "-c", str(cfg), "-o", str(tmp_path), *extra])
    assert code == 0
    out = capsys.readouterr().out
    assert f"method    {method}" in out
    row = read_rows(tmp_path / "estimate.csv")[0]
    assert float(row["d_hat_m"]) == pytest.approx(2.7, abs=1e-3)
    assert float(row["theta_hat_deg"]) == pytest.approx(21.0, abs=1e-3)


def test_estimate_mle_without_sigma_is_config_error(tmp_path, capsys):
    main(["simulate", "-o", str(tmp_path), "--set", "sigma_db=1"])
    assert main(["estimate", str(tmp_path / "measurements.csv"), "-m", "mle", "-o", str(tmp_path)]) == 2
    assert "sigma" in capsys.readouterr().err


def test_estimate_similarity_warns_about_known_receiver(tmp_path, capsys):
    cfg = write_config(tmp_path, "sigma_db = 0\nd0_m = 2.2\ntheta0_deg = -31.0\n")
    main(["simulate", "--moved", "-c", str(cfg), "-o", str(tmp_path)])
    capsys.readouterr()
    code = main(["estimate", str(tmp_path / "measurements.csv"), "-m", "similarity", "-c", str(cfg), "-o", str(tmp_path)])
    assert code == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err and "receiver" in captured.err
    row = read_rows(tmp_path / "estimate.csv")[0]
    assert float(row["d_hat_m"]) == pytest.approx(2.2, abs=1e-3)
    assert float(row["theta_hat_deg"]) == pytest.approx(-31.0, abs=1e-2)


def test_estimate_similarity_needs_second_file(tmp_path):
    main(["simulate", "-o", str(tmp_path), "--set", "sigma_db=0"])
    assert main(["estimate", str(tmp_path / "measurements.csv"), "-m", "similarity", "-o", str(tmp_path)]) == 2


def test_estimate_degenerate_pattern_is_runtime_error(tmp_path, capsys):
    cfg = write_config(tmp_path, 'sigma_db = 0\ntx_pattern = "omnidirectional"\n')
    main(["simulate", "-c", str(cfg), "-o", str(tmp_path)])
    assert main(["estimate", str(tmp_path / "measurements.csv"), "-m", "cid", "-c", str(cfg), "-o", str(tmp_path)]) == 3
    assert "DegenerateError" in capsys.readouterr().err


def test_estimate_missing_measurements(tmp_path):
    assert main(["estimate", str(tmp_path / "none.csv"), "-m", "cid", "-o", str(tmp_path)]) == 2


@pytest.mark.parametrize(
    "text",
    [
        "sweep_values = [10, 5]\n",
        "sweep_values = []\n",
        'sweep_values = ["a"]\n',
        'sweep_axis = "power"\n',
        'sweep_axis = "rotation_count"\nsweep_values = [1, 2]\n',
        'methods = ["mle", "magic"]\n',
    ],
)
def test_sweep_invalid_axis_config(tmp_path, text):
    cfg = write_config(tmp_path, text)
    assert main(["sweep", "-c", str(cfg), "-o", str(tmp_path), "--trials", "2", "-j", "1"]) == 2


@pytest.mark.parametrize(
    "text",
    ["bogus_key = 1\n", "sigma_db = 1\nsnr_db = 10\n", 'd0_m = "far"\n', "[table]\nx = 1\n", "sigma_db = -1\n", "pt_mw ="],
)
def test_bad_config_files(tmp_path, text):
    cfg = write_config(tmp_path, text)
    assert main(["simulate", "-c", str(cfg), "-o", str(tmp_path)]) == 2


def test_bad_override_syntax(tmp_path):
    assert main(["simulate", "-o", str(tmp_path), "--set", "sigma_db"]) == 2


def test_sweep_smoke_is_fast_and_deterministic(tmp_path):
    start = time.perf_counter()
    assert main(["sweep", "-c", str(PRESETS / "fig2.toml"), "--trials", "10", "-o", str(tmp_path / "a"), "--plot"]) == 0
    assert time.perf_counter() - start < 5.0
    main(["sweep", "-c", str(PRESETS / "fig2.toml"), "--trials", "10", "-o", str(tmp_path / "b"), "-j", "1"])
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert len(a.decode().splitlines()) == 1 + 5 * 3
    assert (tmp_path / "a" / "sweep.svg").read_text().startswith("<svg")


def test_crlb_table(tmp_path, capsys):
    assert main(["crlb", "-o", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "crlb.csv")
    assert [float(r["snr_db"]) for r in rows] == [0.0, 5.0, 10.0, 15.0, 20.0]
    theta = [float(r["crlb_theta_deg2"]) for r in rows]
    assert all(a > b for a, b in zip(theta, theta[1:]))


def test_patterns_table(tmp_path):
    assert main(["patterns", "-o", str(tmp_path), "--step-deg", "10", "--plot"]) == 0
    rows = read_rows(tmp_path / "patterns.csv")
    assert len(rows) == 36
    zero = next(r for r in rows if float(r["angle_deg"]) == 0.0)
    assert float(zero["tx_gain_db"]) == pytest.approx(10 * np.log10(1.64), abs=1e-9)
    assert (tmp_path / "patterns.svg").exists()


@pytest.mark.parametrize("command", ["simulate", "estimate", "sweep", "crlb", "patterns"])
def test_help_lists_every_key_with_unit(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for key in KEYS:
        assert f"{key.name}" in out and f"[{key.unit}]" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pattern_locate", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
