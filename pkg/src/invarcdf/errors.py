"""Exception hierarchy shared by the numerical layers."""


class InvarcdfError(Exception):
    """Base class for all package-specific errors."""


class DivergentMoment(InvarcdfError):
    """A Beta moment E[T^m] does not exist (non-integrable power)."""


class DivergentIntegral(InvarcdfError):
    """Adaptive quadrature detected an endpoint singularity that is not integrable."""

    def __init__(self, message, endpoint=None):
        super().__init__(message)
        self.endpoint = endpoint


class DivergentObjective(InvarcdfError):
    """The per-step Bayes objective is infinite for every candidate level."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ImproperPosterior(InvarcdfError):
    """The H-weighted posterior kernel is not integrable at an extreme step."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonMonotoneResult(InvarcdfError):
    """A combined weight vector violates the step-monotonicity requirement."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class TiesDetected(UserWarning):
    """Input data contains tied values; they were perturbed deterministically."""
