"""Exception hierarchy shared by all modules."""


class BecPolaronError(Exception):
    pass


class InputError(BecPolaronError, ValueError):
    """Invalid parameter, argument or file content."""


class SingularityError(BecPolaronError, ZeroDivisionError):
    """An energy denominator vanished exactly."""


class ConvergenceError(BecPolaronError, RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``best`` carries the last estimate, ``partial`` any partially built
    result (e.g. a table with the rows computed before the failure).
    """

    def __init__(self, message, best=None, partial=None):
        super().__init__(message)
        self.best = best
        self.partial = partial


class NonFiniteIntegrandError(ConvergenceError):
    """The integrand returned NaN/inf; ``point`` is the offending sample."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point
