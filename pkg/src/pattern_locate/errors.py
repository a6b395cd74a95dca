"""Exception hierarchy shared by every module of the package."""


class PatternLocateError(Exception):
    """Base class for all package errors."""


class ConfigError(PatternLocateError, ValueError):
    """Invalid configuration value, unknown key, or violated precondition."""


class OutOfSupport(PatternLocateError, ValueError):
    """Angle lies outside the domain on which a pattern is defined."""


class NonPositiveGain(PatternLocateError, ValueError):
    """A tabulated gain entry is not strictly positive."""


class NonFiniteObjective(PatternLocateError, ArithmeticError):
    """An optimizer objective returned NaN or infinity."""


class NoOverlap(PatternLocateError, ValueError):
    """Two polylines share no common theta interval."""


class DegenerateOverlap(PatternLocateError, ValueError):
    """Two polylines coincide over a segment (infinitely many intersections)."""


class DegenerateError(PatternLocateError):
    """The bearing is unobservable, e.g. with an omnidirectional pattern."""


class NoIntersections(PatternLocateError):
    """No pair of target curves crosses inside the search range."""


class MissingReference(PatternLocateError, ValueError):
    """A measurement set lacks the zero-rotation reference sample."""


class DegenerateBaseline(PatternLocateError, ValueError):
    """The target is collinear with the two-position baseline."""


class ZeroNoise(PatternLocateError, ValueError):
    """Fisher information is unbounded because sigma is zero."""


class SingularFim(PatternLocateError, ArithmeticError):
    """The Fisher information matrix cannot be inverted."""


class InsufficientMeasurements(PatternLocateError, ValueError):
    """Fewer than two rotations: distance and bearing cannot both be estimated."""


class SweepAborted(PatternLocateError, RuntimeError):
    """More than half of the trials at one sweep point failed."""
