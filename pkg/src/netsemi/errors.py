"""Exception hierarchy shared by all modules."""


class NetsemiError(Exception):
    """Base class for engine errors."""


class ValidationError(NetsemiError, ValueError):
    """Model data failed validation. ``path`` names the offending key when known."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class InconsistentRates(ValidationError):
    pass


class SinkPresent(ValidationError):
    def __init__(self, sinks):
        super().__init__(f"graph has sink vertices {list(sinks)}")
        self.sinks = list(sinks)


class OutOfDomain(NetsemiError, ValueError):
    pass


class InvalidMu(NetsemiError, ValueError):
    pass


class BranchCut(NetsemiError, ValueError):
    """lambda lies on the excluded half-line (-inf, 0]."""


class NearSpectrum(NetsemiError, ArithmeticError):
    """A boundary system is too ill-conditioned to trust the solve."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NoContraction(NetsemiError, ArithmeticError):
    pass


class SeriesDiverges(NetsemiError, ArithmeticError):
    pass


class NotViolating(NetsemiError, ValueError):
    """Asked for a positivity counterexample on a model that is positive."""


class NoConvergence(NetsemiError, ArithmeticError):
    pass
