"""Exception hierarchy.

``ConfigError`` maps to CLI exit code 1, every ``NumericalError`` to exit code 2.
"""


class CkrrError(Exception):
    pass


class ConfigError(CkrrError, ValueError):
    pass


class NumericalError(CkrrError):
    pass


class RankDeficientFeatures(NumericalError):
    """The feature evaluation matrix has rank below the number of features."""

    def __init__(self, rank, k):
        super().__init__(f"feature matrix has numerical rank {rank} < k={k}")
        self.rank = rank
        self.k = k


class NonPositiveRidge(NumericalError, ValueError):
    pass


class FactorizationError(NumericalError):
    """Cholesky of the regularized residual Gram failed.

    Signals a residual Gram that is not PSD beyond tolerance, i.e. the kernel is
    not conditionally positive definite with respect to the feature class.
    """


class NystromRankError(NumericalError):
    def __init__(self, requested, retained):
        super().__init__(
            f"requested {requested} eigenfunctions but only {retained} eigenvalues "
            "exceed the drop tolerance"
        )
        self.requested = requested
        self.retained = retained


class NoRoot(NumericalError):
    pass


class OverfittingDivergence(NumericalError):
    pass
