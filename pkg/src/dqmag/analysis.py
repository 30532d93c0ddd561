"""Spectrum post-processing: theoretical resonant signal, dip detection, scan comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

PROMINENCE = 0.02


def expected_signal(f_l: float, Ax: float, t):
    """Resonant single-nucleus signal ``cos(f_l A^x t / 2)`` (DQM, nucleus fully mixed)."""
    return np.cos(0.5 * f_l * Ax * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Dip:
    position: float  # rad/s, parabola vertex
    index: int
    depth: float  # 1 - signal at the vertex
    prominence: float


def _parabola_vertex(x, y, i):
    if i == 0 or i == len(x) - 1:
        return x[i], y[i]
    xs, ys = x[i - 1:i + 2], y[i - 1:i + 2]
    a, b, c = np.polyfit(xs - xs[1], ys, 2)
    if a <= 0:
        return x[i], y[i]
    dx = np.clip(-b / (2 * a), xs[0] - xs[1], xs[2] - xs[1])
    return xs[1] + dx, c - b * b / (4 * a)


def find_dips(omega, signal, prominence: float = PROMINENCE) -> list[Dip]:
    """Local minima of ``signal`` with at least ``prominence`` (in signal units).

    Each minimum is refined by a parabola through the three nearest samples.
    """
    omega = np.asarray(omega, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if signal.size < 3:
        return []
    idx, props = find_peaks(-signal, prominence=prominence)
    dips = []
    for i, p in zip(idx, props["prominences"]):
        x, y = _parabola_vertex(omega, signal, i)
        dips.append(Dip(float(x), int(i), float(1.0 - y), float(p)))
    return dips


def compare_scans(a, b, prominence: float = PROMINENCE) -> dict:
    """Dip positions, depths and counts of two scans over the same drive frequencies."""
    wa = np.asarray(a.omega_D_values)
    wb = np.asarray(b.omega_D_values)
    if wa.shape != wb.shape or not np.allclose(wa, wb, rtol=1e-12, atol=0):
        raise ValueError("scans are sampled on different omega_D grids")
    da = find_dips(wa, a.signals, prominence)
    db = find_dips(wb, b.signals, prominence)
    step = float(np.min(np.diff(wa))) if wa.size > 1 else np.nan
    report = {
        "step": step,
        "a": {"count": len(da), "positions": [d.position for d in da],
              "depths": [d.depth for d in da]},
        "b": {"count": len(db), "positions": [d.position for d in db],
              "depths": [d.depth for d in db]},
    }
    if da and db:
        pa = max(da, key=lambda d: d.prominence).position
        pb = max(db, key=lambda d: d.prominence).position
        report["main_position_difference"] = pb - pa
    return report
