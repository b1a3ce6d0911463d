class CureError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(CureError):
    """Malformed input, bad configuration, or a violated precondition."""


class NumericError(CureError):
    """Non-finite values or a diverged computation."""
