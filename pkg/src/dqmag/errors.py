"""Exception hierarchy shared by the simulator and the waveform compiler."""


class DQMError(Exception):
    """Base class for all package errors."""


class GeometryError(DQMError, ValueError):
    """Pulse widths do not fit inside the sequence period."""


class OverlappingDrives(DQMError, ValueError):
    """Both |0> <-> |+1> and |0> <-> |-1> are driven at the same instant."""


class AreaError(DQMError, ValueError):
    """A pulse does not accumulate the required rotation angle."""


class DegenerateBasis(DQMError):
    """The Gaussian-cosine correction has (almost) no overlap with the target harmonic."""


class RangeViolation(DQMError):
    """A modulation segment leaves the range reachable by its pulse.

    Attributes
    ----------
    segment : int
        Index of the offending segment inside the modulation function.
    time : float
        Time (s) of the worst excursion.
    excess : float
        Distance outside the admissible interval.
    """

    def __init__(self, message, segment=None, time=None, excess=None):
        super().__init__(message)
        self.segment = segment
        self.time = time
        self.excess = excess


class StepTooCoarse(DQMError):
    """Halving the integration step changed the final signal beyond tolerance."""


class ConfigError(DQMError, ValueError):
    """Invalid run configuration."""
