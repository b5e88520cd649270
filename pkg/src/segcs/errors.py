"""Exception types raised across the toolkit."""


class SegcsError(Exception):
    pass


class DimensionError(SegcsError, ValueError):
    pass


class SegmentationError(SegcsError, ValueError):
    """Raised when the number of segments does not divide the signal length."""


class UndefinedSNRError(SegcsError, ValueError):
    pass


class InsufficientFamilyError(SegcsError, ValueError):
    """More additional rows were requested than the permutation family can mint."""


class BudgetError(SegcsError, ValueError):
    """Exhaustive enumeration would exceed the configured subset cap."""


class UndefinedConstantError(SegcsError, ValueError):
    def __init__(self, message, a=None):
        super().__init__(message)
        self.a = a


class InfeasibleError(SegcsError, RuntimeError):
    pass


class NonConvergenceError(SegcsError, RuntimeError):
    """Solver stopped without meeting its tolerances.

    ``best`` carries the last iterate the solver produced (may be None).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(SegcsError, ValueError):
    pass
