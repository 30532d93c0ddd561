"""YAML run configuration with unit-suffixed keys.

Example::

    system:
      Bz_T: 3.0
      nucleus: H1
      hyperfine_2pi_kHz: [[7.39, 29.90, -4.61]]
    protocol:
      kind: dqm-modulated     # dqm-instantaneous | dqm-tophat | dqm-modulated | sqm
      n: 21
    harmonic: 43
    repetitions: 576
    scan:
      offset_min_2pi_Hz: -300.0   # omega_D / 2pi relative to omega_L / (2pi l)
      offset_max_2pi_Hz: 300.0
      points: 61
    errors:
      rabi_error: 0.01
      detuning_2pi_kHz: 20.0
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .spin import NUCLEAR_GAMMA_HZ_PER_T, PhysicalConstants, SpinSystem

PROTOCOLS = ("dqm-instantaneous", "dqm-tophat", "dqm-modulated", "sqm")


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class SystemConfig:
    Bz_T: float = 3.0
    nucleus: str = "H1"
    hyperfine_2pi_kHz: list = field(default_factory=list)

    def __post_init__(self):
        if self.nucleus not in NUCLEAR_GAMMA_HZ_PER_T:
            raise ConfigError(f"system.nucleus must be one of {sorted(NUCLEAR_GAMMA_HZ_PER_T)}")
        self.Bz_T = float(self.Bz_T)
        if not self.Bz_T > 0:
            raise ConfigError("system.Bz_T must be positive")
        vecs = []
        for v in self.hyperfine_2pi_kHz or []:
            if len(v) != 3:
                raise ConfigError("system.hyperfine_2pi_kHz entries must be 3-vectors")
            vecs.append([float(x) for x in v])
        self.hyperfine_2pi_kHz = vecs

    def build(self) -> SpinSystem:
        nuclei = tuple(2e3 * np.pi * np.asarray(v) for v in self.hyperfine_2pi_kHz)
        return SpinSystem(self.Bz_T, nuclei, PhysicalConstants.for_species(self.nucleus))


@dataclass
class ProtocolConfig:
    kind: str = "dqm-instantaneous"
    r: float | None = None
    n: int | None = None
    k: int | None = None
    sigma_frac: float = 0.125
    gradient: bool = True

    def __post_init__(self):
        if self.kind not in PROTOCOLS:
            raise ConfigError(f"protocol.kind must be one of {', '.join(PROTOCOLS)}")
        if self.kind == "dqm-tophat" and (self.r is None or not self.r > 0):
            raise ConfigError("protocol.r (t_pi in Larmor periods) must be > 0 for dqm-tophat")
        if self.kind == "dqm-modulated" and (self.n is None or int(self.n) < 1):
            raise ConfigError("protocol.n must be a positive integer for dqm-modulated")
        if self.r is not None:
            self.r = float(self.r)
        self.sigma_frac = float(self.sigma_frac)


@dataclass
class ScanConfig:
    offset_min_2pi_Hz: float = -300.0
    offset_max_2pi_Hz: float = 300.0
    points: int = 61

    def __post_init__(self):
        self.offset_min_2pi_Hz = float(self.offset_min_2pi_Hz)
        self.offset_max_2pi_Hz = float(self.offset_max_2pi_Hz)
        if int(self.points) != self.points or self.points < 0:
            raise ConfigError("scan.points must be a non-negative integer")
        if self.offset_max_2pi_Hz < self.offset_min_2pi_Hz:
            raise ConfigError("scan.offset_max_2pi_Hz < scan.offset_min_2pi_Hz")

    def omegas(self, center: float) -> np.ndarray:
        offsets = np.linspace(self.offset_min_2pi_Hz, self.offset_max_2pi_Hz, int(self.points))
        return center + 2.0 * np.pi * offsets


@dataclass
class ErrorConfig:
    rabi_error: float = 0.0
    detuning_2pi_kHz: float = 0.0

    def __post_init__(self):
        self.rabi_error = float(self.rabi_error)
        self.detuning_2pi_kHz = float(self.detuning_2pi_kHz)
        if not abs(self.rabi_error) < 1:
            raise ConfigError("errors.rabi_error must satisfy |x| < 1")


@dataclass
class SolverConfig:
    step_fraction: float = 1.0 / 160.0
    check_halving: bool = False
    samples_per_pulse: int = 10_001

    def __post_init__(self):
        self.step_fraction = float(self.step_fraction)
        if not 0 < self.step_fraction <= 1:
            raise ConfigError("solver.step_fraction must be in (0, 1]")


@dataclass
class OutputConfig:
    csv: str | None = None
    waveform: str | None = None


@dataclass
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    harmonic: int = 43
    repetitions: int = 1
    scan: ScanConfig = field(default_factory=ScanConfig)
    errors: ErrorConfig = field(default_factory=ErrorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if int(self.harmonic) != self.harmonic or self.harmonic < 1 or self.harmonic % 2 == 0:
            raise ConfigError("harmonic must be a positive odd integer")
        if int(self.repetitions) != self.repetitions or self.repetitions < 0:
            raise ConfigError("repetitions must be a non-negative integer")
        self.harmonic = int(self.harmonic)
        self.repetitions = int(self.repetitions)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        sections = {"system": SystemConfig, "protocol": ProtocolConfig, "scan": ScanConfig,
                    "errors": ErrorConfig, "solver": SolverConfig, "output": OutputConfig}
        unknown = sorted(set(data) - set(sections) - {"harmonic", "repetitions"})
        if unknown:
            raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
        kwargs = {name: _build(sc, data.get(name), name) for name, sc in sections.items()}
        for key in ("harmonic", "repetitions"):
            if key in data:
                kwargs[key] = data[key]
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from None
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text())

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (output paths excluded)."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @property
    def detuning(self) -> float:
        return 2e3 * np.pi * self.errors.detuning_2pi_kHz
