"""Exception hierarchy shared by all modules."""


class ContextualValuesError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ContextualValuesError, ValueError):
    pass


class DensityMatrixError(ContextualValuesError, ValueError):
    """A matrix failed one of the density-matrix invariants.

    ``residual`` holds the size of the violation.
    """

    invariant = "density"

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class NotHermitianError(DensityMatrixError):
    invariant = "hermitian"


class TraceError(DensityMatrixError):
    invariant = "trace"


class NotPositiveError(DensityMatrixError):
    invariant = "positivity"


class DomainError(ContextualValuesError, ValueError):
    """Weakness parameter outside the family's domain."""


class ImpossibleOutcomeError(ContextualValuesError, ValueError):
    """An outcome or postselection has (numerically) zero probability."""


class NotDiagonalError(ContextualValuesError, ValueError):
    pass


class InvalidFamilyError(ContextualValuesError, ValueError):
    pass


class NoContextualValuesError(ContextualValuesError, ValueError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class DegenerateGridError(ContextualValuesError, ValueError):
    pass
