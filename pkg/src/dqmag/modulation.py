"""Modulation function of ``S_z`` under two-tone three-pulse blocks.

One period ``[0, T]`` of the sequence is laid out as::

    gap g | P1 P2 P3 (X block) | gap 2g | P1' P2' P3' (Y block) | gap g

with ``g = (T - 6 t_pi) / 4``. During each pulse the coefficient of ``S_z`` in the
toggling frame follows a closed form in the accumulated rotation angle
``phi(t) = int Omega / 2`` (0 -> pi/2 over one pulse). This module builds that
piecewise ``F(t)``, evaluates its Fourier filter coefficients, designs the
Gaussian-cosine corrections that cancel each pulse's contribution to the target
harmonic, and inverts the corrected ``F(t)`` back into a sampled Rabi waveform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DegenerateBasis, GeometryError, RangeViolation

HALF_PI = 0.5 * np.pi

# tolerance for F leaving its admissible interval (roundoff at segment edges)
RANGE_TOL = 1e-9
# smallest |contribution to f_l| of the correction basis that is accepted
DEGENERATE_TOL = 1e-12


class SegmentKind(enum.Enum):
    FREE_PLUS = "free+"
    FREE_MINUS = "free-"
    PULSE1 = "pulse1"
    PULSE2 = "pulse2"
    PULSE3 = "pulse3"
    PULSE1_MIRROR = "pulse1'"
    PULSE2_MIRROR = "pulse2'"
    PULSE3_MIRROR = "pulse3'"

    @property
    def is_pulse(self) -> bool:
        return self not in (SegmentKind.FREE_PLUS, SegmentKind.FREE_MINUS)

    @property
    def mirrored(self) -> bool:
        return self in (SegmentKind.PULSE1_MIRROR, SegmentKind.PULSE2_MIRROR,
                        SegmentKind.PULSE3_MIRROR)

    @property
    def _base(self):
        return {SegmentKind.PULSE1: 1, SegmentKind.PULSE1_MIRROR: 1,
                SegmentKind.PULSE2: 2, SegmentKind.PULSE2_MIRROR: 2,
                SegmentKind.PULSE3: 3, SegmentKind.PULSE3_MIRROR: 3}.get(self)

    @property
    def transition(self) -> int | None:
        """NV transition driven during this segment (X block: +1 -1 +1, Y block: -1 +1 -1)."""
        if not self.is_pulse:
            return None
        first = -1 if self.mirrored else +1
        return first if self._base in (1, 3) else -first

    @property
    def drive_phase(self) -> float | None:
        if not self.is_pulse:
            return None
        return HALF_PI if self.mirrored else 0.0

    def sz_coefficient(self, phi):
        """Coefficient of ``S_z`` after rotating by ``phi`` inside this segment."""
        phi = np.asarray(phi, dtype=float)
        if self is SegmentKind.FREE_PLUS:
            return np.ones_like(phi)
        if self is SegmentKind.FREE_MINUS:
            return -np.ones_like(phi)
        c2, s2 = np.cos(phi) ** 2, np.sin(phi) ** 2
        base = {1: 0.5 * (c2 + 1.0), 2: 0.5 * (c2 - s2), 3: -0.5 * (1.0 + s2)}[self._base]
        return -base if self.mirrored else base

    def g_coefficient(self, phi):
        """Coefficient of ``G`` after rotating by ``phi`` inside this segment."""
        phi = np.asarray(phi, dtype=float)
        if not self.is_pulse:
            return np.zeros_like(phi)
        # time-ordered toggling frame U(t)^dag S_z U(t), U(t) = U_k(t) ... U_1
        c2, s2 = np.cos(phi) ** 2, np.sin(phi) ** 2
        base = {1: -0.5 * s2, 2: -0.5 * np.ones_like(phi), 3: -0.5 * c2}[self._base]
        return -base if self.mirrored else base

    @property
    def admissible_range(self) -> tuple[float, float]:
        lo, hi = {1: (0.5, 1.0), 2: (-0.5, 0.5), 3: (-1.0, -0.5)}.get(self._base, (-1.0, 1.0))
        return (-hi, -lo) if self.mirrored else (lo, hi)

    def phase_from_sz(self, F):
        """Invert :meth:`sz_coefficient` on the branch ``phi in [0, pi/2]``."""
        F = np.asarray(F, dtype=float)
        if self.mirrored:
            F = -F
        if self._base == 1:
            return np.arccos(np.sqrt(np.clip(2.0 * F - 1.0, 0.0, 1.0)))
        if self._base == 2:
            return 0.5 * np.arccos(np.clip(2.0 * F, -1.0, 1.0))
        if self._base == 3:
            return np.arcsin(np.sqrt(np.clip(-2.0 * F - 1.0, 0.0, 1.0)))
        raise ValueError(f"{self} carries no pulse")


PERIOD_LAYOUT = (
    SegmentKind.FREE_PLUS,
    SegmentKind.PULSE1, SegmentKind.PULSE2, SegmentKind.PULSE3,
    SegmentKind.FREE_MINUS,
    SegmentKind.PULSE1_MIRROR, SegmentKind.PULSE2_MIRROR, SegmentKind.PULSE3_MIRROR,
    SegmentKind.FREE_PLUS,
)


@dataclass(frozen=True)
class GaussianCosine:
    """``alpha cos(2 pi k t / period) exp(-(t - t_mid)^2 / (2 sigma^2))``."""

    alpha: float
    k: int
    sigma: float
    t_mid: float
    period: float

    def shape(self, t):
        t = np.asarray(t, dtype=float)
        return (np.cos(2.0 * np.pi * self.k * t / self.period)
                * np.exp(-0.5 * ((t - self.t_mid) / self.sigma) ** 2))

    def __call__(self, t):
        return self.alpha * self.shape(t)


@dataclass(frozen=True)
class ModulationSegment:
    kind: SegmentKind
    t_start: float
    t_end: float
    correction: GaussianCosine | None = None

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def bare_phase(self, t):
        """Rotation angle of a constant-amplitude pulse (0 -> pi/2 across the segment)."""
        t = np.asarray(t, dtype=float)
        if not self.kind.is_pulse:
            return np.zeros_like(t)
        return HALF_PI * (t - self.t_start) / self.duration

    def bare(self, t):
        return self.kind.sz_coefficient(self.bare_phase(t))

    def __call__(self, t):
        out = self.bare(t)
        if self.correction is not None:
            out = out + self.correction(t)
        return out


@dataclass(frozen=True)
class ModulationFunction:
    """Piecewise ``F(t)`` over one period ``[0, T]``; evaluation wraps modulo ``T``."""

    segments: tuple
    T: float
    t_pi: float

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or segs[0].t_start != 0.0 or not np.isclose(segs[-1].t_end, self.T,
                                                                  rtol=1e-14, atol=0):
            raise GeometryError("segments must tile [0, T]")
        for a, b in zip(segs, segs[1:]):
            if a.t_end != b.t_start:
                raise GeometryError("segments must be contiguous")

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([s.t_start for s in self.segments] + [self.segments[-1].t_end])

    @property
    def pulse_segments(self) -> list[ModulationSegment]:
        return [s for s in self.segments if s.kind.is_pulse]

    def segment_index(self, t) -> np.ndarray:
        edges = self.boundaries
        idx = np.searchsorted(edges, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        tw = np.where((t >= 0) & (t <= self.T), t, np.mod(t, self.T))
        idx = self.segment_index(tw)
        out = np.empty_like(tw)
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if np.any(mask):
                out[mask] = seg(tw[mask])
        return out if out.ndim else float(out)


def _layout(T: float, t_pi: float) -> list[tuple[SegmentKind, float, float]]:
    if t_pi < 0 or not np.isfinite(t_pi):
        raise GeometryError(f"pulse width must be non-negative, got {t_pi!r}")
    if 6.0 * t_pi >= T:
        raise GeometryError(
            f"six pulses of {t_pi:.6g} s do not fit in the period T = {T:.6g} s (need 6 t_pi < T)")
    g = (T - 6.0 * t_pi) / 4.0
    widths = [g, t_pi, t_pi, t_pi, 2.0 * g, t_pi, t_pi, t_pi, g]
    edges = [0.0]
    for w in widths:
        edges.append(edges[-1] + w)
    edges[-1] = float(T)
    return [(kind, edges[i], edges[i + 1]) for i, kind in enumerate(PERIOD_LAYOUT)
            if widths[i] > 0]


def tophat_modulation(l: int, r: float, T: float) -> ModulationFunction:
    """``F(t)`` for constant-amplitude pulses of width ``t_pi = r T / l``.

    ``r`` is the pulse width in units of the nuclear Larmor period when
    ``l omega_D = omega_L``; ``r = 0`` gives the instantaneous square wave.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    t_pi = r * T / l
    segs = [ModulationSegment(kind, a, b) for kind, a, b in _layout(T, t_pi)]
    return ModulationFunction(tuple(segs), T, t_pi)


def _segment_cos_integral(fn, a: float, b: float, l: int, T: float) -> float:
    """``(1/T) int_a^b fn(s) cos(2 pi l s / T) ds`` evaluated in units of ``T``."""
    if b <= a:
        return 0.0
    if (b - a) * l < 1e-3 * T:
        # far shorter than one oscillation: Gauss-Legendre is exact to roundoff
        x, w = np.polynomial.legendre.leggauss(16)
        u = 0.5 * (b - a) / T * x + 0.5 * (a + b) / T
        return float(0.5 * (b - a) / T * np.sum(w * fn(u * T) * np.cos(2.0 * np.pi * l * u)))
    val, _ = integrate.quad(lambda u: fn(u * T), a / T, b / T, weight="cos",
                            wvar=2.0 * np.pi * l, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def segment_filter_contribution(F: ModulationFunction, index: int, l: int) -> float:
    """Contribution of one segment to ``f_l`` (i.e. ``2/T int_seg F cos``)."""
    seg = F.segments[index]
    if not seg.kind.is_pulse and seg.correction is None:
        # constant F = +-1: integrate the cosine exactly
        w = 2.0 * np.pi * l / F.T
        level = float(seg.kind.sz_coefficient(0.0))
        return 2.0 * level * (np.sin(w * seg.t_end) - np.sin(w * seg.t_start)) / (w * F.T)
    return 2.0 * _segment_cos_integral(seg, seg.t_start, seg.t_end, l, F.T)


def fourier_coefficient(F: ModulationFunction, l: int) -> float:
    """``f_l = 2/T int_0^T F(s) cos(l omega_D s) ds`` by per-segment adaptive quadrature."""
    if l < 1:
        raise ValueError("harmonic index must be >= 1")
    return sum(segment_filter_contribution(F, i, l) for i in range(len(F.segments)))


def fl_tophat_analytic(l: int, r):
    """Closed-form filter coefficient for top-hat pulses of width ``r`` Larmor periods.

    Returns 0 for even ``l``. The removable singularity at ``r = 1/2`` is evaluated
    by its limit.
    """
    r = np.asarray(r, dtype=float)
    if l % 2 == 0:
        return np.zeros_like(r) if r.ndim else 0.0
    sign = (-1.0) ** ((l + 1) // 2)
    x = r - 0.5
    near = np.abs(x) < 1e-6
    safe_r = np.where(near, 0.0, r)
    regular = 36.0 * np.cos(np.pi * safe_r) ** 3 / (np.pi * l * (-9.0 + 36.0 * safe_r ** 2))
    # cos^3(pi r) / (36 r^2 - 9) ~ -pi^3 x^2 / (36 (r + 1/2)) near r = 1/2
    limit = 36.0 * (-np.pi ** 3 * x ** 2 / (36.0 * (r + 0.5))) / (np.pi * l)
    out = sign * np.where(near, limit, regular)
    return out if out.ndim else float(out)


def fl_instantaneous(l: int) -> float:
    """``(-1)^((l-1)/2) 4 / (pi l)`` for odd ``l``, else 0."""
    if l % 2 == 0:
        return 0.0
    return (-1.0) ** ((l - 1) // 2) * 4.0 / (np.pi * l)


def fl_cancelled_pulses(l: int, t_pi: float, T: float) -> float:
    """``f_l`` when every pulse integral vanishes and only the free segments count."""
    return 4.0 / (np.pi * l) * np.cos(np.pi * 3.0 * t_pi / (T / l)) * np.sin(np.pi * l / 2.0)


def optimal_pulse_width(l: int, T: float, n: int) -> float:
    """``t_pi = (n/3) (T/l)``: widths for which cancelled pulses restore ``|f_l| = 4/(pi l)``."""
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    t_pi = n / 3.0 * T / l
    if 6.0 * t_pi >= T:
        raise GeometryError(
            f"n = {n} gives t_pi = {t_pi:.6g} s; six pulses exceed the period T = {T:.6g} s "
            f"(requires n < l/2 = {l / 2:g})")
    return t_pi


@dataclass(frozen=True)
class SynthesisParams:
    """Inputs of the corrected-waveform design.

    Parameters
    ----------
    l : int
        Odd target harmonic (``l omega_D = omega_L``).
    n : int
        Pulse width in thirds of a Larmor period, ``t_pi = (n/3) (T/l)``.
    omega_L : float
        Nuclear Larmor frequency (rad/s).
    k : int, optional
        Harmonic of the correction's cosine; defaults to ``l``.
    sigma_frac : float
        Gaussian width as a fraction of ``t_pi``.
    """

    l: int
    n: int
    omega_L: float
    k: int | None = None
    sigma_frac: float = 0.125

    def __post_init__(self):
        if self.l < 1 or self.l % 2 == 0:
            raise ValueError(f"l must be an odd positive integer, got {self.l!r}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        if not self.sigma_frac > 0:
            raise ValueError("sigma_frac must be positive")
        if not self.omega_L > 0:
            raise ValueError("omega_L must be positive")

    @property
    def T(self) -> float:
        return 2.0 * np.pi * self.l / self.omega_L

    @property
    def harmonic_k(self) -> int:
        return self.l if self.k is None else self.k

    @property
    def t_pi(self) -> float:
        return optimal_pulse_width(self.l, self.T, self.n)


def _check_range(F: ModulationFunction, index: int, samples: int) -> tuple[np.ndarray, np.ndarray]:
    seg = F.segments[index]
    t = np.linspace(seg.t_start, seg.t_end, samples)
    vals = seg(t)
    lo, hi = seg.kind.admissible_range
    excess = np.maximum(vals - hi, lo - vals)
    worst = int(np.argmax(excess))
    if excess[worst] > RANGE_TOL:
        raise RangeViolation(
            f"segment {index} ({seg.kind.value}) leaves its admissible range [{lo}, {hi}] by "
            f"{excess[worst]:.3g} at t = {t[worst]:.9g} s; try a different k, sigma_frac or n",
            segment=index, time=float(t[worst]), excess=float(excess[worst]))
    return t, np.clip(vals, lo, hi)


def synthesize_corrected_modulation(params: SynthesisParams,
                                    check_samples: int = 10_000) -> ModulationFunction:
    """Add a Gaussian-cosine term to each pulse so its ``f_l`` contribution vanishes.

    For pulse segment ``i`` the correction amplitude is
    ``alpha_i = -(int F_bare cos) / (int basis cos)`` over that segment. The result is
    checked on ``check_samples`` points per segment against the range reachable by
    the segment's pulse.

    Raises
    ------
    DegenerateBasis
        The correction basis has no overlap with the target harmonic on some segment.
    RangeViolation
        The corrected ``F`` cannot be produced by its pulse.
    """
    T, t_pi, l = params.T, params.t_pi, params.l
    sigma = params.sigma_frac * t_pi
    bare = tophat_modulation(l, params.n / 3.0, T)
    segs = []
    for i, seg in enumerate(bare.segments):
        if not seg.kind.is_pulse:
            segs.append(seg)
            continue
        basis = GaussianCosine(1.0, params.harmonic_k, sigma, 0.5 * (seg.t_start + seg.t_end), T)
        num = _segment_cos_integral(seg.bare, seg.t_start, seg.t_end, l, T)
        den = _segment_cos_integral(basis, seg.t_start, seg.t_end, l, T)
        if abs(2.0 * den) < DEGENERATE_TOL:
            raise DegenerateBasis(
                f"correction basis (k = {params.harmonic_k}, sigma = {sigma:.3g} s) has no "
                f"overlap with harmonic {l} on segment {i}; choose a different k or sigma_frac")
        alpha = -num / den
        segs.append(ModulationSegment(seg.kind, seg.t_start, seg.t_end,
                                      GaussianCosine(alpha, params.harmonic_k, sigma,
                                                     basis.t_mid, T)))
    F = ModulationFunction(tuple(segs), T, t_pi)
    for i, seg in enumerate(F.segments):
        if seg.kind.is_pulse:
            _check_range(F, i, check_samples)
    return F


@dataclass(frozen=True)
class SampledPulse:
    """One pulse of a sampled Rabi waveform.

    ``rabi`` is signed (rad/s); a negative value is realised in hardware as a
    ``pi`` phase offset (see :meth:`RabiWaveform.rows`).
    """

    times: np.ndarray
    rabi: np.ndarray
    transition: int
    phase: float
    kind: SegmentKind

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def rotation_angle(self) -> float:
        """Accumulated ``int Omega / 2`` (the trapezoid rule is exact for the stored grid)."""
        return 0.5 * float(integrate.trapezoid(self.rabi, self.times))

    def accumulated_phase(self) -> np.ndarray:
        return 0.5 * integrate.cumulative_trapezoid(self.rabi, self.times, initial=0.0)

    def rabi_at(self, t):
        """Piecewise-linear interpolant of the samples, zero outside the pulse."""
        return np.interp(t, self.times, self.rabi, left=0.0, right=0.0)


@dataclass(frozen=True)
class RabiWaveform:
    """Sampled drive for the six pulses of one period."""

    pulses: tuple
    T: float
    t_pi: float

    @property
    def max_abs_rabi(self) -> float:
        return max(float(np.max(np.abs(p.rabi))) for p in self.pulses)

    def rows(self):
        """Export rows ``(time_s, |Omega|, phase_rad, transition)`` in time order."""
        for p in self.pulses:
            flip = p.rabi < 0
            phase = np.mod(p.phase + np.where(flip, np.pi, 0.0), 2.0 * np.pi)
            for t, a, ph in zip(p.times, np.abs(p.rabi), phase):
                yield float(t), float(a), float(ph), p.transition


def invert_to_rabi(F: ModulationFunction, sample_rate: float | None = None,
                   samples_per_pulse: int = 10_001) -> RabiWaveform:
    """Recover the Rabi waveform producing ``F(t)`` on every pulse segment.

    The rotation angle is obtained with the segment-specific inverse of the closed
    forms, pinned to 0 and pi/2 at the pulse edges, and differentiated with centred
    differences (one-sided at the edges): ``Omega = 2 dphi/dt``.

    Parameters
    ----------
    sample_rate : float, optional
        Samples per second; overrides ``samples_per_pulse``.
    """
    pulses = []
    for i, seg in enumerate(F.segments):
        if not seg.kind.is_pulse:
            continue
        n = samples_per_pulse
        if sample_rate is not None:
            n = max(int(np.ceil(seg.duration * sample_rate)) + 1, 3)
        t, vals = _check_range(F, i, n)
        phi = seg.kind.phase_from_sz(vals)
        phi[0], phi[-1] = 0.0, HALF_PI
        rabi = 2.0 * np.gradient(phi, t)
        pulses.append(SampledPulse(t, rabi, seg.kind.transition, seg.kind.drive_phase, seg.kind))
    return RabiWaveform(tuple(pulses), F.T, F.t_pi)


def reconstruct_modulation(pulse: SampledPulse) -> np.ndarray:
    """Forward map: integrate the waveform and apply the closed-form ``S_z`` coefficient."""
    return pulse.kind.sz_coefficient(pulse.accumulated_phase())


def modulation_samples(F: ModulationFunction, per_segment: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(t, F(t))`` samples with segment edges included."""
    ts = [np.linspace(s.t_start, s.t_end, per_segment) for s in F.segments]
    t = np.concatenate(ts)
    return t, np.concatenate([s(x) for s, x in zip(F.segments, ts)])


def summarize_waveform(F: ModulationFunction, waveform: RabiWaveform, l: int) -> dict:
    return {
        "f_l": fourier_coefficient(F, l),
        "t_pi_s": F.t_pi,
        "max_abs_rabi_rad_per_s": waveform.max_abs_rabi,
        "alphas": [s.correction.alpha if s.correction else 0.0 for s in F.pulse_segments],
    }


__all__: Sequence[str] = [
    "SegmentKind", "GaussianCosine", "ModulationSegment", "ModulationFunction",
    "SynthesisParams", "SampledPulse", "RabiWaveform",
    "tophat_modulation", "fourier_coefficient", "segment_filter_contribution",
    "fl_tophat_analytic", "fl_instantaneous", "fl_cancelled_pulses", "optimal_pulse_width",
    "synthesize_corrected_modulation", "invert_to_rabi", "reconstruct_modulation",
    "modulation_samples", "summarize_waveform",
]
