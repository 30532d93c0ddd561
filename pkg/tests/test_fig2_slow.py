"""5-spin cluster reproductions (opt-in: DQMAG_SLOW=1 or ``-m slow``)."""

from pathlib import Path

import numpy as np
import pytest

from dqmag.analysis import compare_scans, find_dips
from dqmag.cli import run_scan
from dqmag.config import RunConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
pytestmark = pytest.mark.slow


def scan(name, errors=True):
    cfg = RunConfig.load(CONFIGS / name)
    if not errors:
        cfg.errors.rabi_error = 0.0
        cfg.errors.detuning_2pi_kHz = 0.0
    return run_scan(cfg)


def resonant_depth(s):
    centre = s.omega_D_values.size // 2
    return 1.0 - s.signals[centre]


@pytest.mark.parametrize("errors", [False, True])
def test_dqm_contrast_exceeds_sqm_at_N360(errors):
    sqm = scan("fig2_sqm_N360.yaml")
    dqm = scan("fig2_dqm_N360.yaml", errors)
    assert resonant_depth(dqm) > resonant_depth(sqm)


@pytest.mark.parametrize("N", [540, 720])
@pytest.mark.parametrize("errors", [False, True])
def test_sqm_secondary_peak_absent_from_dqm(N, errors):
    sqm = scan(f"fig2_sqm_N{N}.yaml")
    dqm = scan(f"fig2_dqm_N{N}.yaml", errors)
    rep = compare_scans(sqm, dqm)
    print(f"N = {N}, errors = {errors}: SQM peaks {rep['a']['count']}, DQM peaks {rep['b']['count']}")
    assert rep["b"]["count"] == 1
    dip = find_dips(dqm.omega_D_values, dqm.signals)[0]
    assert abs(dip.position - dqm.omega_D_values[dqm.omega_D_values.size // 2]) <= rep["step"]
    assert rep["a"]["count"] >= 2


def test_sqm_secondary_feature_resolved_at_low_threshold():
    # the secondary SQM feature at N = 720 sits ~48 Hz above the main dip
    s = scan("fig2_sqm_N720.yaml")
    offsets = (np.array([d.position for d in find_dips(s.omega_D_values, s.signals, 0.005)])
               - s.omega_D_values[s.omega_D_values.size // 2]) / (2 * np.pi)
    assert offsets.size >= 2
    assert np.any(np.abs(offsets - 48.0) < 10.0)
