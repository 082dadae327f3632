"""Exception hierarchy shared by every regenbot module."""


class RegenbotError(Exception):
    """Base class for all library errors."""


class InputDomainError(RegenbotError, ValueError):
    """Raised when an input is non-finite, mis-shaped or outside its domain."""


class ModelConsistencyError(RegenbotError):
    """Raised when the dynamic model produces an inconsistent quantity."""


class NumericalError(RegenbotError, ArithmeticError):
    """Raised on ill-conditioning or non-finite intermediate results."""


class DepletedStorageError(RegenbotError):
    """Raised when the capacitor voltage is at or below its usable threshold.

    Attributes
    ----------
    partial : object or None
        Whatever was computed before storage ran out (e.g. a partial trace).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OptimizationFailedError(RegenbotError):
    """Raised when no start of the NLP reached the feasibility tolerance.

    Attributes
    ----------
    best : object or None
        Best infeasible iterate found (a ``CollocationSolution``).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AuditInconsistencyError(RegenbotError):
    """Raised when an energy ledger does not close within its bound."""
