"""Exception types shared across the package."""


class FellerLabError(Exception):
    pass


class DiagonalSingularityError(FellerLabError, ValueError):
    """A kernel was evaluated at coincident boundary points."""


class UnsupportedDimensionError(FellerLabError, ValueError):
    pass


class BoundaryPointError(FellerLabError, ValueError):
    """An interior-only quantity was requested at a boundary point."""


class UnsupportedDataError(FellerLabError, ValueError):
    """The boundary data representation is not supported by this route."""


class NotExcessiveError(FellerLabError, ValueError):
    pass


class NumericalInconsistencyError(FellerLabError, ArithmeticError):
    pass


class HypothesisViolationError(FellerLabError, ValueError):
    """The geometry does not satisfy the assumptions of the requested identity."""


class EstimatorInvalidError(FellerLabError, ValueError):
    pass


class TruncationDominatedError(FellerLabError, ArithmeticError):
    pass


class InstabilityError(FellerLabError, ArithmeticError):
    pass


class SpecValidationError(FellerLabError, ValueError):
    pass
