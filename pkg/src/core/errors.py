"""
Exception hierarchy

This module is part of the trumpet read-out project for mechanical
displacement sensing with a resonantly driven quantum dot.

Two families exist. ValidationError covers bad inputs and maps to exit
code 2 on the command line; NumericalError covers computations that have
no finite answer and maps to exit code 3.
"""


class TrumpetError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TrumpetError, ValueError):
    """Invalid parameter, grid, file or configuration."""


class ConfigError(ValidationError):
    """Invalid run configuration, anchored to a file and line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class DecodeError(ValidationError):
    """Input file does not match the expected format."""


class ChannelCountError(ValidationError):
    """Operation needs a different number of detector channels."""


class UnresolvablePositionError(ValidationError):
    """Mode amplitudes carry no spatial information."""


class NumericalError(TrumpetError, ArithmeticError):
    """Computation has no finite or convergent result."""


class DivergentSensitivityError(NumericalError):
    """The spectral slope vanishes, so the read-out gain is zero."""


class NoCrossoverError(NumericalError):
    """Imprecision and back-action never balance (zero coupling)."""


class NoSignalError(NumericalError):
    """All measured peak areas are zero."""


class FitFailureError(NumericalError):
    """Least-squares fit did not converge."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)
