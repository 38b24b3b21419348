"""Exception types shared across the toolkit."""


class TomokitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TomokitError, ValueError):
    """Malformed input: bad state, protocol, counts, or file content."""


class NumericalError(TomokitError, ArithmeticError):
    """Numerical failure: degenerate matrices, incomplete protocols, etc."""
