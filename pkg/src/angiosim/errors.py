"""Exception types shared across the package."""


class AngiosimError(Exception):
    """Base class for all package errors."""


class ValidationError(AngiosimError, ValueError):
    """An argument or configuration violates a documented precondition."""


class DecodeError(AngiosimError, ValueError):
    """An image file could not be decoded; the message names the bad field."""


class BatchError(AngiosimError, RuntimeError):
    """A batch operation failed as a whole (empty input, aborted write, ...)."""


class NumericalError(AngiosimError, RuntimeError):
    """A numerical routine failed to produce a usable result."""
