"""Exception hierarchy shared by all modules."""


class TwoStepError(Exception):
    """Base class for errors raised by this package."""


class NumericalError(TwoStepError, ArithmeticError):
    """A numerical procedure could not produce a result."""


class DegeneratePolynomialError(NumericalError, ValueError):
    pass


class SingularSystemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class InputFormatError(TwoStepError, ValueError):
    """A problem or coefficient description file could not be parsed."""
