"""Exception hierarchy shared by all revcut modules."""


class RevcutError(Exception):
    """Base class for every error raised by this package."""


class EvaluationError(RevcutError):
    """A profile function returned a non-finite value."""


class ProfileClassError(RevcutError):
    """The warping function is outside the supported class of profiles."""


class DomainError(RevcutError, ValueError):
    """An argument lies outside the open domain of an operation."""


class SingularityError(RevcutError):
    """The endpoint singularity cannot be removed (m' vanishes at the tangency)."""


class QuadratureError(RevcutError):
    """Two evaluations of the same integral disagree beyond their error bars."""


class IntegrationAccuracyError(RevcutError):
    """The fixed-step integrator drifted off the unit-speed constraint."""


class NonArrivalError(RevcutError):
    """A geodesic failed to reach the requested parallel within the horizon."""


class UnsupportedProfileError(RevcutError):
    """The profile is in neither the monotone-curvature class nor K <= 0."""


class AmbiguousClassificationError(RevcutError):
    """The half-period at the base point is within numerical error of pi.

    ``candidates`` holds both possible descriptions so callers can report them.
    """

    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = candidates


class ResolutionError(RevcutError):
    """Tolerance finer than the sampling resolution of the oracle."""
