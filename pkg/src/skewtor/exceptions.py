"""Exception types shared across the package."""


class SpdError(ValueError):
    """A matrix expected to be symmetric positive definite is not.

    `pivot` identifies the first failing Cholesky pivot when known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class DomainError(ValueError):
    """Evaluation point outside the chart box."""


class TorsionError(ValueError):
    """Torsion fails the total-antisymmetry requirement."""


class CrossCheckError(RuntimeError):
    """Two independent computation routes disagree beyond tolerance.

    Carries both values for post-mortem inspection.
    """

    def __init__(self, message, first, second):
        super().__init__(message)
        self.first = first
        self.second = second


class HypothesisError(RuntimeError):
    """A check was invoked on a geometry violating its hypotheses."""


class GeometryError(ValueError):
    """Unknown geometry name or invalid constructor parameters."""
