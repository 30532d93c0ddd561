import numpy as np
import pytest

from dqmag.analysis import compare_scans, expected_signal, find_dips
from dqmag.dynamics import SpectrumScan


def lorentz_dips(x, centers, depths, width=10.0):
    y = np.ones_like(x)
    for c, d in zip(centers, depths):
        y -= d / (1 + ((x - c) / width) ** 2)
    return y


def test_expected_signal():
    assert expected_signal(0.0, 1.0, 5.0) == 1.0
    assert expected_signal(2.0, np.pi, 1.0) == pytest.approx(-1.0)


def test_find_dips_refines_position():
    x = np.linspace(-100, 100, 41)
    y = lorentz_dips(x, [12.3], [0.5])
    dips = find_dips(x, y)
    assert len(dips) == 1
    assert abs(dips[0].position - 12.3) < 2.0
    assert dips[0].depth == pytest.approx(0.5, abs=0.05)


def test_find_dips_prominence_threshold():
    x = np.linspace(-100, 100, 201)
    y = lorentz_dips(x, [-50, 40], [0.3, 0.01])
    assert len(find_dips(x, y)) == 1
    assert len(find_dips(x, y, prominence=0.005)) == 2
    assert find_dips(x[:2], y[:2]) == []


def test_compare_scans():
    x = np.linspace(-100, 100, 101)
    a = SpectrumScan(x, lorentz_dips(x, [-30, 30], [0.2, 0.3]))
    b = SpectrumScan(x, lorentz_dips(x, [0], [0.4]))
    rep = compare_scans(a, b)
    assert rep["a"]["count"] == 2 and rep["b"]["count"] == 1
    assert rep["main_position_difference"] == pytest.approx(-30, abs=1.0)
    assert rep["step"] == pytest.approx(2.0)
    assert compare_scans(a, a)["main_position_difference"] == 0.0
    with pytest.raises(ValueError):
        compare_scans(a, SpectrumScan(x[:-1], b.signals[:-1]))
