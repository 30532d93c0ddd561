import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dqmag.cli import main, read_scan_csv
from dqmag.config import RunConfig
from dqmag.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = """
system:
  hyperfine_2pi_kHz: [[7.39, 29.90, -4.61]]
protocol:
  kind: dqm-tophat
  r: 0.894
harmonic: 43
repetitions: 1000
scan:
  offset_min_2pi_Hz: -5000
  offset_max_2pi_Hz: 5000
  points: 11
"""


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_config_round_trip():
    cfg = RunConfig.loads(SMALL)
    again = RunConfig.loads(cfg.dumps())
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.detuning == 0.0


@pytest.mark.parametrize("text", [
    "bogus: 1",
    "protocol: {kind: dqm-tophat}",
    "protocol: {kind: sqm, bogus: 1}",
    "harmonic: 42",
    "errors: {rabi_error: 1.5}",
    "system: {hyperfine_2pi_kHz: [[1, 2]]}",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        RunConfig.loads(text)


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.yaml")):
        RunConfig.load(path)


def test_flcoef(tmp_path):
    out = tmp_path / "fl.csv"
    assert main(["flcoef", "--l", "43", "--r-points", "16", "-o", str(out)]) == 0
    data = np.genfromtxt(out, delimiter=",", names=True)
    assert data.size == 16
    assert np.max(data["abs_diff"]) < 1e-8


def test_synth_report(tmp_path, capsys):
    cfg = write(tmp_path, "protocol: {kind: dqm-modulated, n: 21}\nsolver: {samples_per_pulse: 1001}\n")
    wf = tmp_path / "wf.txt"
    assert main(["synth", str(cfg), "--waveform", str(wf)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert abs(abs(rep["f_l"]) - rep["f_l_target"]) < 1e-6 * rep["f_l_target"]
    assert 30 < rep["max_abs_rabi_2pi_MHz"] < 45
    rows = np.loadtxt(wf, comments="#", usecols=(0, 1, 2, 3))
    assert rows.shape == (6 * 1001, 4)


def test_synth_minimal_width(tmp_path, capsys):
    reports = []
    for n in (3, 21):
        cfg = write(tmp_path, f"protocol: {{kind: dqm-modulated, n: {n}, sigma_frac: 0.17}}\n"
                              "solver: {samples_per_pulse: 2001}\n")
        assert main(["synth", str(cfg)]) == 0
        reports.append(json.loads(capsys.readouterr().out))
    assert reports[0]["t_pi_s"] < reports[1]["t_pi_s"]
    assert reports[0]["max_abs_rabi_2pi_MHz"] > reports[1]["max_abs_rabi_2pi_MHz"]


def test_synth_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "protocol: {kind: dqm-modulated, n: 21, sigma_frac: 1.0e-9}\n")
    assert main(["synth", str(cfg)]) == 4
    assert "DegenerateBasis" in capsys.readouterr().err
    cfg = write(tmp_path, "protocol: {kind: dqm-modulated, n: 61}\n")
    assert main(["synth", str(cfg)]) == 4


def test_bad_config_exit_code(tmp_path):
    assert main(["scan", str(write(tmp_path, "nope: 1"))]) == 3
    assert main(["scan", str(tmp_path / "missing.yaml")]) == 3


def test_scan_empty_range(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.replace("points: 11", "points: 0"))
    assert main(["scan", str(cfg)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1] == "omega_D_over_2pi_Hz,signal,one_minus_signal"
    assert all(line.startswith("#") for line in lines[:-1])


def test_scan_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["scan", str(cfg), "-o", str(a), "--no-timestamp"]) == 0
    assert main(["scan", str(cfg), "-o", str(b), "--no-timestamp", "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    scan = read_scan_csv(a)
    assert scan.signals.size == 11
    assert scan.metadata["config_digest"] == RunConfig.load(cfg).digest()
    assert np.argmin(scan.signals) == 5
    assert np.all(np.abs(scan.signals) <= 1) and np.all(scan.frequencies_hz > 0)


def test_compare_identical(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "a.csv"
    main(["scan", str(cfg), "-o", str(out)])
    capsys.readouterr()
    assert main(["compare", str(out), str(cfg)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["a"]["count"] == rep["b"]["count"] == 1
    assert rep["main_position_difference_2pi_Hz"] == 0.0


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "dqmag.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
