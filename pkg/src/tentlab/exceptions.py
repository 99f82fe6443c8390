"""Exception types raised by the checkers and solvers."""


class LabError(Exception):
    """Base class for all errors raised by tentlab."""


class PreconditionError(LabError, ValueError):
    """An input violates a hypothesis required by a checker."""


class NumericError(LabError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class CapacityError(LabError):
    """A problem exceeds the configured size guard."""


class ConvergenceError(NumericError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    residual : float
        Residual at the last iterate.
    history : list of float
        Residual trace, oldest first.
    """

    def __init__(self, message, residual=float("nan"), history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


class FeasibilityError(LabError, ValueError):
    """Dual potentials violate the transport constraint."""

    def __init__(self, message, pair=None, violation=0.0):
        super().__init__(message)
        self.pair = pair
        self.violation = violation


class TruncationError(NumericError):
    """An integrand does not decay enough at the grid boundary."""


class SchemaMismatchError(LabError):
    """Two report files do not share the same record layout."""
