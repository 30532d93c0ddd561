"""Double-quantum NV magnetometry at high field: pulse schedules, waveform synthesis and spin dynamics."""

__version__ = "0.1.0"

from .errors import (AreaError, ConfigError, DegenerateBasis, DQMError, GeometryError,
                     OverlappingDrives, RangeViolation, StepTooCoarse)
from .spin import HyperfineVector, PhysicalConstants, SpinSystem, hyperfine_frame, spin1_operators

__all__ = [
    "__version__", "AreaError", "ConfigError", "DegenerateBasis", "DQMError", "GeometryError",
    "OverlappingDrives", "RangeViolation", "StepTooCoarse", "HyperfineVector",
    "PhysicalConstants", "SpinSystem", "hyperfine_frame", "spin1_operators",
]
