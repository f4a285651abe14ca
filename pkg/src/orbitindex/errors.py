"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class OrbitIndexError(Exception):
    """Base class. ``exit_code`` is the CLI status this error maps to."""

    exit_code = 3


class ValidationFailure(OrbitIndexError):
    exit_code = 2


class ConfigError(OrbitIndexError):
    exit_code = 4


class InfeasibleSpec(ValidationFailure):
    pass


class DomainError(OrbitIndexError):
    pass


class LeftDomain(OrbitIndexError):
    pass


class ConservationFailure(OrbitIndexError):
    pass


class NoRoot(OrbitIndexError):
    pass


class AmbiguousRoot(OrbitIndexError):
    pass


class ContinuationBreakdown(OrbitIndexError):
    pass


class DegenerateCylinder(OrbitIndexError):
    pass


class NoConvergence(OrbitIndexError):
    pass


class ToleranceAmbiguity(OrbitIndexError):
    pass


class FrameDegenerate(OrbitIndexError):
    pass


class CrossingResolutionFailure(OrbitIndexError):
    pass


class DeltaTooLarge(OrbitIndexError):
    pass


class NotInRange(OrbitIndexError):
    pass


class NotRegular(OrbitIndexError):
    pass


class NotCritical(OrbitIndexError):
    pass


class BandAmbiguity(OrbitIndexError):
    pass
