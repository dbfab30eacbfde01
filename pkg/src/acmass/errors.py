"""Exception types raised across the package."""


class AcmassError(Exception):
    """Base class for all package errors."""


class InvalidGeometry(AcmassError, ValueError):
    pass


class MeshFailure(AcmassError):
    pass


class EmptyRegion(AcmassError, ValueError):
    pass


class FullRegion(AcmassError, ValueError):
    pass


class AmbiguousProjection(AcmassError):
    pass


class MassOutOfRange(AcmassError, ValueError):
    pass


class QuadratureFailure(AcmassError):
    pass


class NonTermination(AcmassError):
    pass


class InvariantViolation(AcmassError, ValueError):
    pass


class VolumeTooLarge(AcmassError, ValueError):
    pass


class MassUnreachable(AcmassError):
    """The mass-correction shift cannot hit the target mass.

    ``achieved`` carries the closest mass the shift range produces.
    """

    def __init__(self, message, achieved=None, delta=None):
        super().__init__(message)
        self.achieved = achieved
        self.delta = delta


class SupportTouchesBoundary(AcmassError):
    pass


class ZeroMass(AcmassError, ValueError):
    pass


class LinearSolveFailure(AcmassError):
    pass


class StepCollapse(AcmassError):
    pass


class DidNotConverge(AcmassError):
    pass


class SingularKKT(AcmassError):
    pass


class FactorizationFailure(AcmassError):
    pass


class ConfigError(AcmassError):
    """Configuration problem; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
