"""Time evolution of the NV + nuclear cluster under a pulse schedule, and drive-frequency scans."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, StepTooCoarse
from .sequences import (FreeGap, InstantFlip, Instantaneous, Sampled, Schedule, ThreePulseBlock,
                        TopHat, build_sqm_schedule, qubit_flip, rotation)
from .spin import (SPIN1, SpinSystem, drive_generator, expm_hermitian, sqm_effective_hamiltonian,
                   static_hamiltonian)

WORKERS_ENV = "DQMAG_WORKERS"
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class ErrorModel:
    """Control imperfections.

    Attributes
    ----------
    rabi_error : float
        Fractional amplitude error, ``Omega -> (1 + rabi_error) Omega``.
    detuning : float
        Common shift of the ``|+-1>`` levels (rad/s); ``|1>`` only for the qubit runs.
    """

    rabi_error: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not abs(self.rabi_error) < 1:
            raise ValueError("|rabi_error| must be < 1")


@dataclass(frozen=True)
class StepControl:
    """Step size for sampled pulses: ``fraction * min(2 pi / omega_L, pi / Omega_max)``.

    With ``check_halving`` the run is repeated at half the step and
    :class:`StepTooCoarse` is raised if the signal moves by more than ``tolerance``.
    """

    fraction: float = 1.0 / 160.0
    check_halving: bool = False
    tolerance: float = 1e-4

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must be in (0, 1]")

    def halved(self) -> "StepControl":
        return StepControl(0.5 * self.fraction, False, self.tolerance)


@dataclass(frozen=True, eq=False)
class SimulationState:
    """Weighted ensemble of pure states stored as columns of ``states``."""

    states: np.ndarray
    weights: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def norm_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=0) - 1.0)))

    @property
    def trace_error(self) -> float:
        return abs(float(np.sum(self.weights * np.sum(np.abs(self.states) ** 2, axis=0))) - 1.0)

    def density_matrix(self) -> np.ndarray:
        return (self.states * self.weights) @ self.states.conj().T


def initial_state(system: SpinSystem, kind: str = "dqm") -> SimulationState:
    """NV in ``(|1> + |-1>)/sqrt2`` (DQM) or ``(|1> + |0>)/sqrt2`` (SQM qubit), nuclei fully mixed.

    The mixed nuclear state is represented by one column per nuclear basis state.
    """
    nd = system.nuclear_dim
    if kind == "dqm":
        nv = (SPIN1.ket(1) + SPIN1.ket(-1)) / math.sqrt(2.0)
    elif kind == "sqm":
        nv = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    states = np.kron(nv.reshape(-1, 1), np.eye(nd, dtype=complex))
    return SimulationState(states, np.full(nd, 1.0 / nd))


def signal_observable(system: SpinSystem, kind: str = "dqm") -> np.ndarray:
    """``sigma~_x = |1><-1| + h.c.`` for DQM, qubit ``sigma_x`` for SQM."""
    if kind == "dqm":
        return system.embed_nv(SPIN1.sigma_x_dq)
    return system.embed_nv(np.array([[0, 1], [1, 0]], dtype=complex))


def expectation(state, observable: np.ndarray) -> float:
    """``Re Tr(rho O)``; the imaginary residue must stay below 1e-10.

    ``state`` may be a :class:`SimulationState`, a state vector or a density matrix.
    """
    O = np.asarray(observable)
    if isinstance(state, SimulationState):
        if state.dim != O.shape[0]:
            raise ValueError(f"state dimension {state.dim} does not match observable {O.shape}")
        vals = np.einsum("ik,ij,jk->k", state.states.conj(), O, state.states)
        value = complex(np.sum(state.weights * vals))
    else:
        rho = np.asarray(state)
        if rho.shape[0] != O.shape[0]:
            raise ValueError(f"state dimension {rho.shape} does not match observable {O.shape}")
        value = complex(rho.conj() @ O @ rho) if rho.ndim == 1 else complex(np.trace(rho @ O))
    if abs(value.imag) > IMAG_TOL:
        raise AssertionError(f"expectation has imaginary part {value.imag:.3e}")
    return value.real


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """``M[K-1] ... M[1] M[0]`` by pairwise reduction (fixed order, so deterministic)."""
    mats = np.asarray(mats)
    while mats.shape[0] > 1:
        k = mats.shape[0] - mats.shape[0] % 2
        paired = mats[1:k:2] @ mats[0:k:2]
        mats = np.concatenate([paired, mats[k:]]) if k < mats.shape[0] else paired
    return mats[0]


class PeriodKernel:
    """Pieces of the full-system period propagator that do not depend on ``omega_D``.

    Pulse and block propagators are computed once; free gaps use the exact
    exponential of the static Hamiltonian. :meth:`period` rescales the gaps for a
    new drive frequency while keeping the pulses fixed.
    """

    def __init__(self, system: SpinSystem, schedule: Schedule,
                 error_model: ErrorModel = ErrorModel(), step_control: StepControl = StepControl()):
        self.kind = schedule.kind
        self.system = system
        self.error_model = error_model
        self.step_control = step_control
        self.reference_period = schedule.period
        self.repetitions = schedule.repetitions
        nd = system.nuclear_dim
        if self.kind == "dqm":
            H0 = static_hamiltonian(system, error_model.detuning)
        else:
            H0 = sqm_effective_hamiltonian(system, gradient=schedule.gradient)
            if error_model.detuning:
                H0 = H0 + error_model.detuning * np.kron(np.diag([1.0, 0.0]), np.eye(nd))
        self.H0 = H0
        self._E, self._V = np.linalg.eigh(H0)
        self.steps_used = 0
        self.pulse_time = 0.0
        self.items = []
        for it in schedule.items:
            if isinstance(it, FreeGap):
                self.items.append(("gap", it.duration))
            elif isinstance(it, ThreePulseBlock):
                self.items.append(("op", self._block(it)))
                self.pulse_time += it.duration
            elif isinstance(it, InstantFlip):
                angle = (1.0 + error_model.rabi_error) * 0.5 * np.pi
                self.items.append(("op", system.embed_nv(qubit_flip(it.phase, angle))))
            else:
                raise TypeError(f"unsupported schedule item {it!r}")
        self._free_reference = self.reference_period - self.pulse_time

    def _step(self, max_rabi: float) -> float:
        scales = [2.0 * np.pi / self.system.omega_L] if self.system.n_nuclei else []
        if np.isfinite(max_rabi) and max_rabi > 0:
            scales.append(np.pi / ((1.0 + abs(self.error_model.rabi_error)) * max_rabi))
        return self.step_control.fraction * min(scales)

    def _pulse(self, p) -> np.ndarray:
        eps = self.error_model.rabi_error
        w = p.waveform
        if isinstance(w, Instantaneous):
            return self.system.embed_nv(rotation(p.transition, p.phase, (1.0 + eps) * p.rotation_angle))
        X = self.system.embed_nv(drive_generator(p.transition, p.phase))
        if isinstance(w, TopHat):
            return expm_hermitian(self.H0 + 0.5 * (1.0 + eps) * w.rabi * X, p.duration)
        n = max(1, int(math.ceil(p.duration / self._step(w.max_abs) - 1e-9)))
        grid = np.linspace(0.0, p.duration, n + 1)
        dt = np.diff(grid)
        mean_rabi = np.diff(w.integral(grid)) / dt
        H = self.H0[None] + (0.5 * (1.0 + eps) * mean_rabi)[:, None, None] * X[None]
        self.steps_used += n
        return ordered_product(expm_hermitian(H, dt))

    def _block(self, block: ThreePulseBlock) -> np.ndarray:
        return ordered_product(np.stack([self._pulse(p) for p in block.pulses]))

    def gap(self, duration: float) -> np.ndarray:
        return (self._V * np.exp(-1j * self._E * duration)) @ self._V.conj().T

    def period(self, omega_D: float | None = None) -> np.ndarray:
        """Full-system propagator of one repetition unit (at ``omega_D`` if given)."""
        scale = 1.0
        if omega_D is not None:
            period = 2.0 * np.pi / omega_D * (4.0 if self.kind == "sqm" else 1.0)
            free = period - self.pulse_time
            if free <= 0:
                raise GeometryError(f"pulses do not fit in the period at omega_D = {omega_D!r}")
            scale = free / self._free_reference
        U = np.eye(self.H0.shape[0], dtype=complex)
        for tag, payload in self.items:
            U = (self.gap(scale * payload) if tag == "gap" else payload) @ U
        return U

    def total(self, omega_D: float | None = None, repetitions: int | None = None) -> np.ndarray:
        N = self.repetitions if repetitions is None else repetitions
        return np.linalg.matrix_power(self.period(omega_D), N)

    def signal(self, omega_D: float | None = None, repetitions: int | None = None) -> float:
        U = self.total(omega_D, repetitions)
        psi = initial_state(self.system, self.kind)
        final = SimulationState(U @ psi.states, psi.weights)
        value = expectation(final, signal_observable(self.system, self.kind))
        if abs(value) > 1.0 + 1e-9:
            raise AssertionError(f"signal {value!r} outside [-1, 1]")
        return float(np.clip(value, -1.0, 1.0))


def _check_dims(system: SpinSystem, schedule: Schedule, state: SimulationState):
    nv = 3 if schedule.kind == "dqm" else 2
    if state.dim != nv * system.nuclear_dim:
        raise ValueError(f"state dimension {state.dim} incompatible with a {schedule.kind} run "
                         f"of {system.n_nuclei} nuclei")


def propagate(system: SpinSystem, schedule: Schedule, error_model: ErrorModel = ErrorModel(),
              initial: SimulationState | None = None,
              step_control: StepControl = StepControl()) -> SimulationState:
    """Evolve ``initial`` through ``schedule.repetitions`` repetition units.

    One period propagator is assembled (exact gap exponentials, step-wise sampled
    pulses) and raised to the repetition count.
    """
    if initial is None:
        initial = initial_state(system, schedule.kind)
    _check_dims(system, schedule, initial)
    kernel = PeriodKernel(system, schedule, error_model, step_control)
    U = kernel.total()
    final = SimulationState(U @ initial.states, initial.weights, initial.time + schedule.total_time)
    if step_control.check_halving and kernel.steps_used:
        fine = PeriodKernel(system, schedule, error_model, step_control.halved()).total()
        obs = signal_observable(system, schedule.kind)
        a = expectation(final, obs)
        b = expectation(SimulationState(fine @ initial.states, initial.weights), obs)
        if abs(a - b) > step_control.tolerance:
            raise StepTooCoarse(f"halving the step moved the signal by {abs(a - b):.3e} "
                                f"(tolerance {step_control.tolerance:.1e})")
    return final


def simulate_signal(system: SpinSystem, schedule: Schedule, error_model: ErrorModel = ErrorModel(),
                    step_control: StepControl = StepControl()) -> float:
    """``<sigma~_x>`` (DQM) or qubit ``<sigma_x>`` (SQM) after the full schedule."""
    final = propagate(system, schedule, error_model, step_control=step_control)
    return expectation(final, signal_observable(system, schedule.kind))


@dataclass
class SpectrumScan:
    omega_D_values: np.ndarray
    signals: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega_D_values = np.asarray(self.omega_D_values, dtype=float)
        self.signals = np.asarray(self.signals, dtype=float)
        if self.omega_D_values.shape != self.signals.shape:
            raise ValueError("omega_D_values and signals differ in length")

    @property
    def one_minus(self) -> np.ndarray:
        return 1.0 - self.signals

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.omega_D_values / (2.0 * np.pi)


def _scan_chunk(kernel: PeriodKernel, omegas) -> list[float]:
    return [kernel.signal(w) for w in omegas]


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def scan_spectrum(system: SpinSystem, schedule_template: Schedule, omega_D_values,
                  error_model: ErrorModel = ErrorModel(), step_control: StepControl = StepControl(),
                  workers: int | None = None, metadata: dict | None = None) -> SpectrumScan:
    """Signal versus drive frequency.

    ``schedule_template`` fixes the pulses and the repetition count; for each
    ``omega_D`` only the free gaps are rescaled. Points are independent and may be
    spread over a process pool (``workers`` or the ``DQMAG_WORKERS`` variable); the
    output is identical for any worker count.
    """
    omegas = np.asarray(omega_D_values, dtype=float).ravel()
    kernel = PeriodKernel(system, schedule_template, error_model, step_control)
    n_workers = min(resolve_workers(workers), max(1, omegas.size))
    if n_workers == 1 or omegas.size < 2:
        signals = _scan_chunk(kernel, omegas)
    else:
        chunks = np.array_split(omegas, n_workers)
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = pool.map(_scan_chunk, [kernel] * len(chunks), chunks)
            signals = [s for part in parts for s in part]
    meta = {"kind": schedule_template.kind, "label": schedule_template.label,
            "repetitions": schedule_template.repetitions}
    meta.update(metadata or {})
    return SpectrumScan(omegas, np.asarray(signals, dtype=float), meta)


def run_sqm(system: SpinSystem, repetitions: int, omega_D_values, gradient: bool = True,
            error_model: ErrorModel = ErrorModel(), workers: int | None = None) -> SpectrumScan:
    """XY8 scan on the ``{|1>, |0>}`` qubit with the gradient term (or without it)."""
    omegas = np.asarray(omega_D_values, dtype=float).ravel()
    ref = omegas[omegas.size // 2] if omegas.size else system.omega_L
    template = build_sqm_schedule(ref, repetitions, gradient=gradient)
    return scan_spectrum(system, template, omegas, error_model, workers=workers,
                         metadata={"gradient": bool(gradient)})
