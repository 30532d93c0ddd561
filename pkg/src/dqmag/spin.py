"""Spin-1 (NV) and spin-1/2 (nuclear) operator algebra and Hamiltonian assembly.

Basis ordering is fixed: the NV electronic spin uses ``(|+1>, |0>, |-1>)`` so that
``S_z = diag(1, 0, -1)``; nuclei follow in declaration order, each in
``(|up>, |down>)``. The full Hilbert space is ``NV (x) nucleus_1 (x) ... (x) nucleus_N``.

All frequencies are angular (rad/s). Helpers converting from ``(2 pi) x Hz`` live
at the I/O boundary (see :mod:`dqmag.config`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import OverlappingDrives

TWO_PI = 2.0 * np.pi

# Nuclear gyromagnetic ratios in Hz/T (multiply by 2 pi for rad/s/T).
NUCLEAR_GAMMA_HZ_PER_T = {
    "H1": 42.577e6,
    "C13": 10.7084e6,
    "F19": 40.078e6,
    "P31": 17.235e6,
}


@dataclass(frozen=True)
class PhysicalConstants:
    """NV and nuclear constants in rad/s (and rad/s/T).

    Parameters
    ----------
    D : float
        Zero-field splitting.
    gamma_e : float
        Magnitude of the electron gyromagnetic ratio.
    gamma_n : float
        Nuclear gyromagnetic ratio (proton by default).
    """

    D: float = TWO_PI * 2.87e9
    gamma_e: float = TWO_PI * 28.024e9
    gamma_n: float = TWO_PI * NUCLEAR_GAMMA_HZ_PER_T["H1"]

    def __post_init__(self):
        for name in ("D", "gamma_e", "gamma_n"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value!r}")

    @classmethod
    def for_species(cls, species: str) -> "PhysicalConstants":
        try:
            gamma = NUCLEAR_GAMMA_HZ_PER_T[species]
        except KeyError:
            known = ", ".join(sorted(NUCLEAR_GAMMA_HZ_PER_T))
            raise ValueError(f"unknown nuclear species {species!r} (known: {known})") from None
        return cls(gamma_n=TWO_PI * gamma)


_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class HyperfineVector:
    """Hyperfine vector of one nucleus, decomposed in its own frame.

    The transverse axis ``x_hat`` points along the component of ``A`` orthogonal to
    the NV axis, ``y_hat = z x x_hat``. In that frame ``A . I = Ax I_x + Az I_z``.
    For a purely axial vector the transverse frame is undefined (``x_hat`` and
    ``y_hat`` are ``None``) and ``Ax = Ay = 0``.
    """

    A: tuple

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float).reshape(3)
        if not np.all(np.isfinite(A)):
            raise ValueError("hyperfine vector must be finite")
        object.__setattr__(self, "A", tuple(float(a) for a in A))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.A)

    @property
    def Az(self) -> float:
        return self.A[2]

    @property
    def transverse(self) -> np.ndarray:
        return np.array([self.A[0], self.A[1], 0.0])

    @property
    def Ax(self) -> float:
        return float(np.hypot(self.A[0], self.A[1]))

    @property
    def Ay(self) -> float:
        return float(np.linalg.norm(np.cross(_Z, self.vector)))

    @property
    def x_hat(self) -> np.ndarray | None:
        Ax = self.Ax
        if Ax == 0.0:
            return None
        return self.transverse / Ax

    @property
    def y_hat(self) -> np.ndarray | None:
        Ay = self.Ay
        if Ay == 0.0:
            return None
        return np.cross(_Z, self.vector) / Ay

    def rebuild(self) -> np.ndarray:
        """Reassemble ``Ax x_hat + Az z``."""
        x_hat = self.x_hat
        out = self.Az * _Z
        if x_hat is not None:
            out = out + self.Ax * x_hat
        return out


def hyperfine_frame(A) -> HyperfineVector:
    """Decompose a hyperfine vector (rad/s) into its transverse/axial frame."""
    return HyperfineVector(tuple(np.asarray(A, dtype=float).reshape(3)))


@dataclass(frozen=True)
class Spin1Operators:
    Sz: np.ndarray
    Sx: np.ndarray
    G: np.ndarray
    identity: np.ndarray
    sigma_x_dq: np.ndarray

    # index of each m_s in the basis
    index = {+1: 0, 0: 1, -1: 2}

    def ket(self, m: int) -> np.ndarray:
        v = np.zeros(3, dtype=complex)
        v[self.index[m]] = 1.0
        return v

    def projector(self, m: int, m2: int | None = None) -> np.ndarray:
        """``|m><m2|`` (``m2`` defaults to ``m``)."""
        m2 = m if m2 is None else m2
        return np.outer(self.ket(m), self.ket(m2).conj())


def spin1_operators() -> Spin1Operators:
    """NV spin-1 operators in the ``(|+1>, |0>, |-1>)`` basis.

    ``G = |1><1| - 2|0><0| + |-1><-1|`` together with ``S_z`` and the identity spans
    the diagonal operators; ``sigma_x_dq = |1><-1| + |-1><1|`` is the
    double-quantum readout observable.
    """
    Sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    Sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2.0)
    G = np.diag([1.0, -2.0, 1.0]).astype(complex)
    sx_dq = np.zeros((3, 3), dtype=complex)
    sx_dq[0, 2] = sx_dq[2, 0] = 1.0
    return Spin1Operators(Sz=Sz, Sx=Sx, G=G, identity=np.eye(3, dtype=complex), sigma_x_dq=sx_dq)


SPIN1 = spin1_operators()

# spin-1/2 operators (hbar = 1)
IX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
IY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
IZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
I2 = np.eye(2, dtype=complex)


def drive_generator(transition: int, phase: float) -> np.ndarray:
    """3x3 operator ``e^{-i phase}|m><0| + e^{i phase}|0><m|`` for ``m = transition``."""
    if transition not in (+1, -1):
        raise ValueError(f"transition must be +1 or -1, got {transition!r}")
    return (np.exp(-1j * phase) * SPIN1.projector(transition, 0)
            + np.exp(1j * phase) * SPIN1.projector(0, transition))


@dataclass(frozen=True)
class Drive:
    """Instantaneous microwave drive on one NV transition (rotating frame)."""

    transition: int
    rabi: float
    phase: float = 0.0


@dataclass(frozen=True)
class SpinSystem:
    """One NV centre plus a cluster of spin-1/2 nuclei.

    Parameters
    ----------
    Bz : float
        Static field along the NV axis (T).
    nuclei : sequence of HyperfineVector or 3-vectors
        Hyperfine vectors in rad/s.
    constants : PhysicalConstants
    """

    Bz: float
    nuclei: tuple = ()
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        nuclei = tuple(n if isinstance(n, HyperfineVector) else hyperfine_frame(n)
                       for n in self.nuclei)
        object.__setattr__(self, "nuclei", nuclei)

    @property
    def n_nuclei(self) -> int:
        return len(self.nuclei)

    @property
    def nuclear_dim(self) -> int:
        return 2 ** self.n_nuclei

    @property
    def dim(self) -> int:
        return 3 * self.nuclear_dim

    @property
    def omega_L(self) -> float:
        """Nuclear Larmor frequency ``gamma_n Bz`` (rad/s)."""
        return self.constants.gamma_n * self.Bz

    def nuclear_operator(self, j: int, op: np.ndarray) -> np.ndarray:
        """Embed a 2x2 operator acting on nucleus ``j`` into the nuclear space."""
        out = np.ones((1, 1), dtype=complex)
        for i in range(self.n_nuclei):
            out = np.kron(out, op if i == j else I2)
        return out

    def embed_nv(self, op: np.ndarray) -> np.ndarray:
        """``op (x) 1_nuclei`` for an operator on the NV space (3x3 or 2x2)."""
        return np.kron(op, np.eye(self.nuclear_dim, dtype=complex))

    @cached_property
    def _coupling_terms(self):
        zeeman = np.zeros((self.nuclear_dim,) * 2, dtype=complex)
        coupling = np.zeros_like(zeeman)
        for j, hf in enumerate(self.nuclei):
            Iz = self.nuclear_operator(j, IZ)
            zeeman -= self.omega_L * Iz
            coupling += hf.Ax * self.nuclear_operator(j, IX) + hf.Az * Iz
        return zeeman, coupling

    def nuclear_zeeman(self) -> np.ndarray:
        """``-sum_j omega_L I_j^z`` on the nuclear space."""
        return self._coupling_terms[0]

    def hyperfine_coupling(self) -> np.ndarray:
        """``sum_j A_j . I_j`` on the nuclear space, each nucleus in its hyperfine frame."""
        return self._coupling_terms[1]


def static_hamiltonian(system: SpinSystem, detuning: float = 0.0) -> np.ndarray:
    """Drive-free part of the rotating-frame Hamiltonian.

    ``-sum_j omega_L I_j^z + S_z sum_j A_j . I_j + detuning (|1><1| + |-1><-1|)``.
    """
    nd = system.nuclear_dim
    H = np.kron(SPIN1.identity, system.nuclear_zeeman())
    H = H + np.kron(SPIN1.Sz, system.hyperfine_coupling())
    if detuning:
        H = H + detuning * np.kron(SPIN1.projector(1) + SPIN1.projector(-1), np.eye(nd))
    return H


def rotating_frame_hamiltonian(system: SpinSystem, drives: Iterable[Drive] = (),
                               detuning: float = 0.0) -> np.ndarray:
    """Full NV + nuclei Hamiltonian at one instant, rotating frame of the NV.

    Parameters
    ----------
    drives : iterable of Drive
        Active drives at this instant. Drives with zero Rabi frequency are ignored;
        driving both transitions at once raises :class:`OverlappingDrives`.
    detuning : float
        Common energy shift of the ``|+-1>`` levels (rad/s).
    """
    active = [d for d in drives if d.rabi != 0.0]
    if len({d.transition for d in active}) > 1:
        raise OverlappingDrives("simultaneous drives on both NV transitions")
    H = static_hamiltonian(system, detuning)
    for d in active:
        H = H + 0.5 * d.rabi * system.embed_nv(drive_generator(d.transition, d.phase))
    return H


def rotating_frame_hamiltonian_fn(system: SpinSystem, rabi, phase: float = 0.0,
                                  transition: int = +1, detuning: float = 0.0):
    """Time-dependent version: returns ``t -> H(t)`` for a Rabi envelope ``rabi(t)``."""
    H0 = static_hamiltonian(system, detuning)
    X = system.embed_nv(drive_generator(transition, phase))

    def H(t):
        return H0 + 0.5 * float(rabi(t)) * X

    return H


def sqm_effective_hamiltonian(system: SpinSystem, gradient: bool = True) -> np.ndarray:
    """Qubit ``{|1>, |0>}`` (x) nuclei Hamiltonian used for single-quantum runs.

    ``-sum omega_L I^z + (sigma_z / 2) sum A.I + (1 / 2) sum A.I``; the last
    (gradient) term is dropped with ``gradient=False``. Qubit basis order is
    ``(|1>, |0>)``.
    """
    sz = np.diag([1.0, -1.0]).astype(complex)
    coupling = system.hyperfine_coupling()
    H = np.kron(I2, system.nuclear_zeeman()) + 0.5 * np.kron(sz, coupling)
    if gradient:
        H = H + 0.5 * np.kron(I2, coupling)
    return H


def hermiticity_error(H: np.ndarray) -> float:
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def unitarity_error(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def expm_hermitian(H: np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """``exp(-i H t)`` through the eigendecomposition of Hermitian ``H``.

    ``H`` may be a stack ``(..., d, d)``; ``t`` broadcasts against the leading axes.
    """
    E, V = np.linalg.eigh(H)
    phases = np.exp(-1j * E * np.asarray(t, dtype=float)[..., None])
    return (V * phases[..., None, :]) @ np.swapaxes(V.conj(), -1, -2)
