"""Exception hierarchy and CLI exit codes."""


class AoisimError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(AoisimError):
    """Invalid scenario, policy, or plan configuration."""

    exit_code = 2


class InputOutputError(AoisimError):
    """File could not be read or written."""

    exit_code = 3


class InfeasibleError(AoisimError):
    """A constraint cannot be met (uncovered cell, overloaded channel, ...)."""

    exit_code = 4


class NumericError(AoisimError):
    """A numeric routine failed to converge or hit a degenerate input."""

    exit_code = 5


class TraceParseError(InputOutputError):
    """Malformed visibility trace input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceExhausted(AoisimError):
    """A non-wrapping trace ran out of samples."""

    exit_code = 4
