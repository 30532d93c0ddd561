import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from dqmag.errors import AreaError, GeometryError
from dqmag.modulation import (SynthesisParams, fourier_coefficient, invert_to_rabi,
                              synthesize_corrected_modulation, tophat_modulation)
from dqmag.sequences import (BlockVariant, FreeGap, InstantFlip, Instantaneous, PulseSegment,
                             Sampled, TopHat, build_dqm_schedule, build_sqm_schedule,
                             pulse_propagator, rotation, schedule_modulation, three_pulse_block)
from dqmag.spin import SPIN1, SpinSystem, drive_generator

OMEGA_L = SpinSystem(3.0).omega_L
OMEGA_D = OMEGA_L / 43
T = 2 * np.pi / OMEGA_D


def random_sampled(rng, duration=50e-9, n=401):
    """Smooth random envelope with area pi (may change sign)."""
    t = np.linspace(0.0, duration, n)
    shape = 1.0 + sum(rng.normal(scale=0.5) * np.sin((k + 1) * np.pi * t / duration)
                      for k in range(4))
    area = np.sum(0.5 * np.diff(t) * (shape[1:] + shape[:-1]))
    return Sampled(t, np.pi * shape / area)


def test_pi_pulse_swaps_levels():
    U = pulse_propagator(PulseSegment(+1, 0.0, Instantaneous(), 0.0))
    assert np.allclose(U @ SPIN1.ket(1), -1j * SPIN1.ket(0))
    assert np.allclose(U @ SPIN1.ket(-1), SPIN1.ket(-1))
    assert np.allclose(U, expm(-1j * np.pi / 2 * drive_generator(1, 0.0)))


def test_zero_angle_is_identity_and_double_pi():
    assert np.allclose(rotation(1, 0.3, 0.0), np.eye(3))
    U = pulse_propagator(PulseSegment(+1, 0.0, Instantaneous(), 0.0))
    assert np.allclose(U @ U, np.diag([-1, -1, 1]))


def test_tophat_matches_exponential():
    rabi = 2 * np.pi * 50e6
    seg = PulseSegment(-1, 0.7, TopHat(rabi), np.pi / rabi)
    ref = expm(-1j * 0.5 * rabi * seg.duration * drive_generator(-1, 0.7))
    assert np.allclose(pulse_propagator(seg), ref, atol=1e-12)
    assert seg.rotation_angle == pytest.approx(np.pi / 2)


def test_sampled_propagator_equals_stepped_product():
    rng = np.random.default_rng(0)
    w = random_sampled(rng)
    seg = PulseSegment(+1, 0.0, w, w.duration)
    U = np.eye(3, dtype=complex)
    for a in 0.5 * np.diff(w.integral(w.times)):
        U = expm(-1j * a * drive_generator(1, 0.0)) @ U
    assert np.allclose(pulse_propagator(seg), U, atol=1e-10)
    assert np.allclose(pulse_propagator(seg, 0.01), rotation(1, 0.0, 1.01 * np.pi / 2), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(list(BlockVariant)), st.booleans())
def test_block_flips_sz(seed, variant, sampled):
    rng = np.random.default_rng(seed)
    if sampled:
        templates = [random_sampled(rng) for _ in range(3)]
    else:
        templates = TopHat(2 * np.pi * rng.uniform(1e6, 1e9))
    U = three_pulse_block(variant, templates).propagator()
    assert np.max(np.abs(U.conj().T @ SPIN1.Sz @ U + SPIN1.Sz)) < 1e-10


def test_block_pair_restores_sz():
    Ux = three_pulse_block(BlockVariant.X).propagator()
    Uy = three_pulse_block(BlockVariant.Y).propagator()
    U = Uy @ Ux
    assert np.allclose(U.conj().T @ SPIN1.Sz @ U, SPIN1.Sz, atol=1e-12)


def test_sz_after_first_pulse():
    U1 = pulse_propagator(PulseSegment(+1, 0.0, Instantaneous(), 0.0))
    assert np.allclose(U1.conj().T @ SPIN1.Sz @ U1, SPIN1.projector(0) - SPIN1.projector(-1))


def test_area_error():
    bad = Sampled(np.linspace(0, 1e-8, 11), np.full(11, 0.99 * np.pi / 1e-8))
    with pytest.raises(AreaError):
        three_pulse_block(BlockVariant.X, bad)


def test_dqm_schedule_geometry():
    s = build_dqm_schedule(OMEGA_D, 200, t_pi=7e-9)
    gaps = [it.duration for it in s.items if isinstance(it, FreeGap)]
    assert gaps[1] == pytest.approx(2 * gaps[0]) and gaps[2] == pytest.approx(gaps[0])
    assert s.period == pytest.approx(T)
    assert s.pulses_per_period == 3 * len(s.blocks) == 6
    assert s.pulse_count == 1200
    assert build_dqm_schedule(OMEGA_D, 0).pulse_count == 0
    with pytest.raises(GeometryError):
        build_dqm_schedule(OMEGA_D, 1, t_pi=T / 6)


def test_sqm_schedule():
    s = build_sqm_schedule(OMEGA_D, 3)
    flips = [it for it in s.items if isinstance(it, InstantFlip)]
    assert len(flips) == 8 and s.pulse_count == 24
    assert s.period == pytest.approx(4 * T)
    t = (np.arange(40000) + 0.5) / 40000 * s.period
    F, _ = schedule_modulation(s, t)
    f1 = 2 / s.period * np.sum(F * np.cos(OMEGA_D * t)) * (s.period / t.size)
    assert f1 == pytest.approx(4 / np.pi, abs=1e-4)


@pytest.mark.parametrize("r", [0.0, 0.3, 0.894])
def test_schedule_modulation_matches_tophat_closed_form(r):
    s = build_dqm_schedule(OMEGA_D, 1, t_pi=r * 2 * np.pi / OMEGA_L)
    F = tophat_modulation(43, r, T)
    t = (np.arange(5000) + 0.37) / 5000 * T
    Fs, G = schedule_modulation(s, t)
    assert np.max(np.abs(Fs - F(t))) < 1e-6
    Gref = [F.segments[i].kind.g_coefficient(F.segments[i].bare_phase(x))
            for i, x in zip(F.segment_index(t), t)]
    assert np.max(np.abs(G - np.array(Gref))) < 1e-6


def test_schedule_modulation_matches_corrected_waveform():
    F = synthesize_corrected_modulation(SynthesisParams(43, 21, OMEGA_L))
    wf = invert_to_rabi(F)
    s = build_dqm_schedule(OMEGA_D, 1, waveform=wf)
    assert s.t_pi == pytest.approx(F.t_pi)
    t = (np.arange(6000) + 0.37) / 6000 * T
    Fs, _ = schedule_modulation(s, t)
    assert np.max(np.abs(Fs - F(t))) < 1e-4
    assert fourier_coefficient(F, 43) == pytest.approx(
        2 / T * np.sum(Fs * np.cos(43 * OMEGA_D * t)) * T / t.size, abs=2e-4)
