"""Exception types shared across the simulator modules."""


class InvalidSpectrumError(ValueError):
    """Spectral data violate a physical precondition (non-finite, non-positive, ...)."""


class GridMismatchError(ValueError):
    """Two spectral objects were combined but live on different frequency grids."""


class ResolutionError(ValueError):
    """A frequency grid is too coarse to resolve the narrowest spectral feature."""


class BandwidthError(ValueError):
    """An input signal carries energy outside the span of the medium response grid."""


class WindowOverlapError(ValueError):
    """Analysis windows that must be disjoint overlap."""


class TrainTooLongError(ValueError):
    """A temporal mode train does not fit inside the memory storage time."""


class PeriodicityError(ValueError):
    """No periodic comb structure could be detected in a spectral profile."""


class RankDeficiencyError(RuntimeError):
    """The fit model Jacobian carries no usable parameter sensitivity."""


class ChannelConflictError(ValueError):
    """A timeline assigns conflicting states to one channel at the same instant."""


class ConfigError(ValueError):
    """A scenario configuration file is malformed or fails schema validation."""
