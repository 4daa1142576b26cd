"""Exception types shared across the package."""


class NotAdmissible(ValueError):
    """Black-hole parameters do not give the required horizon structure.

    ``diagnostics`` carries whatever was computed before giving up
    (raw quartic roots, discriminant, sign-change counts).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class Degenerate(ValueError):
    """A critical point that should be unique and non-degenerate is not."""


class DomainError(ValueError):
    """A function was evaluated outside the interval where it is defined."""


class ConsistencyError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance."""


class NoConvergence(RuntimeError):
    """An iterative solve did not converge; ``trace`` holds the history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class ConditionError(RuntimeError):
    """A linear solve is too ill-conditioned to trust."""

    def __init__(self, message, estimate=float("nan")):
        super().__init__(message)
        self.estimate = estimate


class TruncationError(RuntimeError):
    """A sequence of truncated integrals failed to settle."""

    def __init__(self, message, sequence=None):
        super().__init__(message)
        self.sequence = list(sequence or [])


class ConditionsViolated(UserWarning):
    """The sufficient conditions for growth fail; the search is still attempted."""
