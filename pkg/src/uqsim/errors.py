"""Exception hierarchy shared by all uqsim modules."""


class UqsimError(Exception):
    pass


class InvalidArgumentError(UqsimError, ValueError):
    pass


class DegenerateStateError(UqsimError, ArithmeticError):
    """Raised when a state has (numerically) zero trace and cannot be normalized."""


class NumericError(UqsimError, ArithmeticError):
    pass


class BracketError(UqsimError, ValueError):
    """The objective does not change sign across the requested bracket."""


class InsufficientDataError(UqsimError, ValueError):
    pass
