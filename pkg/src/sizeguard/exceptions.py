"""Exception types raised by :mod:`sizeguard`."""


class SizeGuardError(Exception):
    """Base class for all package errors."""


class InputError(SizeGuardError, ValueError):
    """Invalid user input (shapes, ranges, malformed files)."""


class NumericalError(SizeGuardError, ArithmeticError):
    """A numerical routine failed on inputs that should have been valid."""
