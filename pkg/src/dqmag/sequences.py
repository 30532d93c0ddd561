"""Pulse schedules: single pulses, three-pulse blocks, DQM periods and the SQM XY8 train."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import AreaError, GeometryError
from .modulation import RabiWaveform, SampledPulse
from .spin import SPIN1, drive_generator

HALF_PI = 0.5 * np.pi
AREA_TOL = 1e-6


@dataclass(frozen=True)
class Instantaneous:
    """Ideal zero-duration pulse."""


@dataclass(frozen=True)
class TopHat:
    """Constant Rabi frequency (rad/s)."""

    rabi: float


@dataclass(frozen=True, eq=False)
class Sampled:
    """Signed Rabi samples on a grid of times measured from the pulse start.

    Between samples the envelope is linear; integrals of the interpolant are exact.
    """

    times: np.ndarray
    rabi: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        r = np.asarray(self.rabi, dtype=float)
        if t.ndim != 1 or t.shape != r.shape or t.size < 2:
            raise ValueError("times and rabi must be 1-d arrays of equal length >= 2")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("sample times must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rabi", r)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (r[1:] + r[:-1]))])
        object.__setattr__(self, "_cumulative", cum)

    @classmethod
    def from_pulse(cls, pulse: SampledPulse) -> "Sampled":
        return cls(pulse.times - pulse.times[0], pulse.rabi)

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def integral(self, t) -> np.ndarray:
        """``int_0^t Omega(s) ds`` of the linear interpolant (clamped to the pulse)."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        t0 = self.times[i]
        r0 = self.rabi[i]
        slope = (self.rabi[i + 1] - r0) / (self.times[i + 1] - t0)
        dt = t - t0
        return self._cumulative[i] + dt * (r0 + 0.5 * slope * dt)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.rabi)))


Waveform = Union[Instantaneous, TopHat, Sampled]


@dataclass(frozen=True)
class PulseSegment:
    """One drive interval on transition ``|0> <-> |transition>``.

    ``target_area`` is ``int Omega dt``; the pulses used here are pi pulses, i.e. a
    final rotation angle ``phi_f = target_area / 2 = pi / 2``.
    """

    transition: int
    phase: float
    waveform: Waveform
    duration: float
    target_area: float = np.pi

    def __post_init__(self):
        if self.transition not in (+1, -1):
            raise ValueError("transition must be +1 or -1")
        if isinstance(self.waveform, Instantaneous):
            if self.duration != 0.0:
                raise ValueError("instantaneous pulses have zero duration")
        elif not self.duration > 0:
            raise ValueError("finite pulses need a positive duration")
        if isinstance(self.waveform, Sampled) and not np.isclose(
                self.waveform.duration, self.duration, rtol=1e-12, atol=0):
            raise ValueError("sampled waveform length differs from the segment duration")

    @property
    def rotation_angle(self) -> float:
        """Accumulated ``phi_f = int Omega / 2``."""
        w = self.waveform
        if isinstance(w, Instantaneous):
            return 0.5 * self.target_area
        if isinstance(w, TopHat):
            return 0.5 * w.rabi * self.duration
        return 0.5 * float(w.integral(self.duration))

    def rotation_angle_at(self, dt) -> np.ndarray:
        """Rotation angle accumulated after ``dt`` seconds into the pulse."""
        w = self.waveform
        dt = np.clip(np.asarray(dt, dtype=float), 0.0, self.duration)
        if isinstance(w, Instantaneous):
            return np.full_like(dt, 0.5 * self.target_area)
        if isinstance(w, TopHat):
            return 0.5 * w.rabi * dt
        return 0.5 * w.integral(dt)

    @property
    def max_rabi(self) -> float:
        w = self.waveform
        if isinstance(w, TopHat):
            return abs(w.rabi)
        if isinstance(w, Sampled):
            return w.max_abs
        return np.inf

    @property
    def generator(self) -> np.ndarray:
        return drive_generator(self.transition, self.phase)


def rotation(transition: int, phase: float, angle) -> np.ndarray:
    """``exp(-i angle X)`` in closed form, ``X = e^{-i phase}|m><0| + h.c.``.

    ``I + (cos angle - 1)(|m><m| + |0><0|) - i sin angle X``; ``angle`` may be an array.
    """
    X = drive_generator(transition, phase)
    P = SPIN1.projector(transition) + SPIN1.projector(0)
    angle = np.asarray(angle, dtype=float)[..., None, None]
    return SPIN1.identity + (np.cos(angle) - 1.0) * P - 1j * np.sin(angle) * X


def pulse_propagator(segment: PulseSegment, rabi_error: float = 0.0) -> np.ndarray:
    """NV-only (3x3) propagator of one pulse.

    Every waveform drives a single transition at a fixed phase, so the
    sub-rotations commute and the propagator depends only on the pulse area.
    """
    return rotation(segment.transition, segment.phase, (1.0 + rabi_error) * segment.rotation_angle)


class BlockVariant(enum.Enum):
    """Three-pulse blocks: X uses transitions (+1, -1, +1) at phase 0, Y (-1, +1, -1) at pi/2."""

    X = "X"
    Y = "Y"

    @property
    def transitions(self) -> tuple[int, int, int]:
        return (+1, -1, +1) if self is BlockVariant.X else (-1, +1, -1)

    @property
    def phase(self) -> float:
        return 0.0 if self is BlockVariant.X else HALF_PI


def _as_segment(template, transition: int, phase: float) -> PulseSegment:
    if isinstance(template, PulseSegment):
        return PulseSegment(transition, phase, template.waveform, template.duration,
                            template.target_area)
    if isinstance(template, Instantaneous):
        return PulseSegment(transition, phase, template, 0.0)
    if isinstance(template, TopHat):
        return PulseSegment(transition, phase, template, np.pi / abs(template.rabi))
    if isinstance(template, Sampled):
        return PulseSegment(transition, phase, template, template.duration)
    if isinstance(template, SampledPulse):
        s = Sampled.from_pulse(template)
        return PulseSegment(transition, phase, s, s.duration)
    raise TypeError(f"unsupported waveform template {template!r}")


@dataclass(frozen=True)
class ThreePulseBlock:
    variant: BlockVariant
    pulses: tuple

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.pulses)

    def propagator(self, rabi_error: float = 0.0) -> np.ndarray:
        """NV-only block propagator ``U3 U2 U1`` (first pulse acts first)."""
        U = SPIN1.identity
        for p in self.pulses:
            U = pulse_propagator(p, rabi_error) @ U
        return U


def three_pulse_block(variant: BlockVariant, waveform_template=Instantaneous()) -> ThreePulseBlock:
    """Build an effective ``S_z -> -S_z`` block.

    Parameters
    ----------
    waveform_template : waveform or sequence of three waveforms
        A single template is reused for every pulse; a sequence gives each pulse its
        own shape (as produced by :func:`dqmag.modulation.invert_to_rabi`).

    Raises
    ------
    AreaError
        If a pulse's rotation angle differs from pi/2 by more than 1e-6 rad.
    """
    variant = BlockVariant(variant)
    if isinstance(waveform_template, (list, tuple)):
        templates = list(waveform_template)
        if len(templates) != 3:
            raise ValueError("a block needs exactly three pulse templates")
    else:
        templates = [waveform_template] * 3
    pulses = tuple(_as_segment(t, m, variant.phase) for t, m in zip(templates, variant.transitions))
    for i, p in enumerate(pulses):
        err = p.rotation_angle - 0.5 * p.target_area
        if abs(err) > AREA_TOL:
            raise AreaError(f"pulse {i} of the {variant.value} block rotates by "
                            f"{p.rotation_angle:.9f} rad (target {0.5 * p.target_area:.9f})")
    return ThreePulseBlock(variant, pulses)


@dataclass(frozen=True)
class FreeGap:
    duration: float


@dataclass(frozen=True)
class InstantFlip:
    """Ideal qubit pi pulse about X (phase 0) or Y (phase pi/2), SQM only."""

    phase: float


@dataclass(frozen=True)
class Schedule:
    """Repeated period of free gaps and pulses.

    Attributes
    ----------
    items : tuple
        One repetition unit (``FreeGap``, ``ThreePulseBlock`` or ``InstantFlip``).
    period : float
        Duration of one repetition unit (s).
    repetitions : int
    omega_D : float
        Sequence frequency ``2 pi / T`` of the modulation function (rad/s).
    kind : {"dqm", "sqm"}
    gradient : bool
        SQM only: keep the NV-state-independent hyperfine term in the qubit Hamiltonian.
    """

    items: tuple
    period: float
    repetitions: int
    omega_D: float
    kind: str = "dqm"
    label: str = field(default="", compare=False)
    gradient: bool = True

    def __post_init__(self):
        if self.repetitions < 0:
            raise ValueError("repetitions must be >= 0")
        total = sum(self.item_duration(it) for it in self.items)
        if not np.isclose(total, self.period, rtol=1e-12, atol=0):
            raise GeometryError(f"item durations sum to {total!r}, not the period {self.period!r}")

    @staticmethod
    def item_duration(item) -> float:
        if isinstance(item, FreeGap):
            return item.duration
        if isinstance(item, ThreePulseBlock):
            return item.duration
        return 0.0

    @property
    def blocks(self) -> list[ThreePulseBlock]:
        return [it for it in self.items if isinstance(it, ThreePulseBlock)]

    @property
    def pulses_per_period(self) -> int:
        return 3 * len(self.blocks) + sum(isinstance(it, InstantFlip) for it in self.items)

    @property
    def pulse_count(self) -> int:
        return self.pulses_per_period * self.repetitions

    @property
    def total_time(self) -> float:
        return self.period * self.repetitions

    @property
    def max_rabi(self) -> float:
        rabis = [p.max_rabi for b in self.blocks for p in b.pulses]
        return max(rabis) if rabis else np.inf

    @property
    def t_pi(self) -> float:
        durations = [p.duration for b in self.blocks for p in b.pulses]
        return max(durations) if durations else 0.0


def build_dqm_schedule(omega_D: float, repetitions: int = 1, *, t_pi: float = 0.0,
                       waveform: RabiWaveform | None = None) -> Schedule:
    """One DQM period ``T = 2 pi / omega_D`` repeated ``repetitions`` times.

    Layout: ``gap g | X block | gap 2g | Y block | gap g`` with
    ``g = (T - 6 t_pi) / 4``. Pulses are instantaneous (``t_pi = 0``), top-hat of
    width ``t_pi`` with ``Omega = pi / t_pi``, or the six sampled pulses of
    ``waveform`` (whose shapes are kept when ``omega_D`` moves off the design value).
    """
    if not omega_D > 0:
        raise ValueError("omega_D must be positive")
    T = 2.0 * np.pi / omega_D
    if waveform is not None:
        if len(waveform.pulses) != 6:
            raise ValueError("a DQM period needs six sampled pulses")
        t_pi = waveform.t_pi
        block_x = three_pulse_block(BlockVariant.X, list(waveform.pulses[:3]))
        block_y = three_pulse_block(BlockVariant.Y, list(waveform.pulses[3:]))
        label = "dqm-modulated"
    elif t_pi > 0:
        tmpl = TopHat(np.pi / t_pi)
        block_x = three_pulse_block(BlockVariant.X, tmpl)
        block_y = three_pulse_block(BlockVariant.Y, tmpl)
        label = "dqm-tophat"
    else:
        block_x = three_pulse_block(BlockVariant.X)
        block_y = three_pulse_block(BlockVariant.Y)
        label = "dqm-instantaneous"
    pulse_time = block_x.duration + block_y.duration
    if pulse_time >= T:
        raise GeometryError(f"pulses ({pulse_time:.6g} s) do not fit in T = {T:.6g} s")
    g = (T - pulse_time) / 4.0
    items = (FreeGap(g), block_x, FreeGap(2.0 * g), block_y,
             FreeGap(T - 3.0 * g - pulse_time))
    return Schedule(items, T, int(repetitions), omega_D, "dqm", label)


XY8_PHASES = (0.0, HALF_PI, 0.0, HALF_PI, HALF_PI, 0.0, HALF_PI, 0.0)


def build_sqm_schedule(omega_D: float, repetitions: int = 1, gradient: bool = True) -> Schedule:
    """``(XYXYYXYX)^N`` with instantaneous qubit flips.

    Each 8-pulse unit lasts ``4 T`` (``T = 2 pi / omega_D``); flips are spaced by
    ``T/2`` with ``T/4`` edge gaps, so the modulation function has period ``T``.
    """
    if not omega_D > 0:
        raise ValueError("omega_D must be positive")
    T = 2.0 * np.pi / omega_D
    items: list = [FreeGap(T / 4.0)]
    for i, ph in enumerate(XY8_PHASES):
        items.append(InstantFlip(ph))
        items.append(FreeGap(T / 2.0 if i < 7 else T / 4.0))
    return Schedule(tuple(items), 4.0 * T, int(repetitions), omega_D, "sqm", "sqm", bool(gradient))


def qubit_flip(phase: float, angle: float = HALF_PI) -> np.ndarray:
    """Qubit rotation ``exp(-i angle (cos phase sigma_x + sin phase sigma_y))`` in ``(|1>, |0>)``.

    The default angle gives the ideal pi pulse ``-i (cos phase sigma_x + sin phase sigma_y)``.
    """
    n = np.array([[0, np.exp(-1j * phase)], [np.exp(1j * phase), 0]])
    return np.cos(angle) * np.eye(2) - 1j * np.sin(angle) * n


def _nv_item_propagator(item, dt=None, rabi_error: float = 0.0) -> np.ndarray:
    """NV-only propagator of ``item`` over its first ``dt`` seconds (whole item if None)."""
    if isinstance(item, FreeGap):
        return np.eye(3, dtype=complex)
    if isinstance(item, InstantFlip):
        return qubit_flip(item.phase)
    U = SPIN1.identity
    elapsed = 0.0
    for p in item.pulses:
        if dt is not None and dt < elapsed + p.duration:
            angle = (1.0 + rabi_error) * float(p.rotation_angle_at(dt - elapsed))
            return rotation(p.transition, p.phase, angle) @ U
        U = pulse_propagator(p, rabi_error) @ U
        elapsed += p.duration
    return U


def toggling_frame_operator(schedule: Schedule, times: Sequence[float]) -> np.ndarray:
    """``U(t)^dag Z U(t)`` at each time within one period, stacked along axis 0.

    ``U(t)`` is the NV-only propagator of the schedule up to ``t`` and ``Z`` is
    ``S_z`` (DQM) or the qubit ``sigma_z`` (SQM). Besides the diagonal parts this
    carries the level coherences that finite pulses create.
    """
    times = np.asarray(times, dtype=float)
    sqm = schedule.kind == "sqm"
    Z = np.diag([1.0, -1.0]).astype(complex) if sqm else SPIN1.Sz
    out = np.empty((times.size,) + Z.shape, dtype=complex)
    U = np.eye(Z.shape[0], dtype=complex)
    start = 0.0
    items = list(schedule.items)
    j = 0
    for idx in np.argsort(times):
        t = times[idx]
        while j < len(items) - 1 and t > start + Schedule.item_duration(items[j]):
            if not isinstance(items[j], FreeGap):
                U = _nv_item_propagator(items[j]) @ U
            start += Schedule.item_duration(items[j])
            j += 1
        item = items[j]
        # instantaneous flips apply at their position; a time exactly at a flip sees it applied
        while isinstance(item, InstantFlip) and j < len(items) - 1:
            U = _nv_item_propagator(item) @ U
            j += 1
            item = items[j]
        Ut = U if isinstance(item, FreeGap) else _nv_item_propagator(item, t - start) @ U
        out[idx] = Ut.conj().T @ Z @ Ut
    return out


def schedule_modulation(schedule: Schedule, times: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``S_z`` and ``G`` in ``U(t)^dag S_z U(t)`` within one period.

    Computed by conjugating the NV operator through the actual pulse propagators, so
    it is independent of the closed forms in :mod:`dqmag.modulation`. For SQM
    schedules the first array holds the ``sigma_z`` coefficient and the second is zero.
    """
    M = toggling_frame_operator(schedule, times)
    if schedule.kind == "sqm":
        F = np.real(M[:, 0, 0] - M[:, 1, 1]) / 2.0
        return F, np.zeros_like(F)
    F = np.real(np.einsum("ij,tji->t", SPIN1.Sz, M)) / 2.0
    Gc = np.real(np.einsum("ij,tji->t", SPIN1.G, M)) / 6.0
    return F, Gc
