"""
Errors Module

This module defines the exception hierarchy shared by the library and the
command tools, plus the helper that turns an exception into the tool result
envelope and the CLI exit code.
"""

from typing import Any, Dict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class PBGNetError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(PBGNetError, ValueError):
    """Shape or dimension mismatch, including empty batches."""


class CapacityError(PBGNetError, ValueError):
    """A combinatorial sum or an oracle exceeds its configured size."""


class ModeError(PBGNetError, ValueError):
    """An exact computation received a sampled forward pass, or the reverse."""


class DataFormatError(PBGNetError, ValueError):
    """Malformed input files, absent classes or empty splits."""


class ConfigError(PBGNetError, ValueError):
    """Invalid experiment configuration or command usage."""


class NumericError(PBGNetError, ArithmeticError):
    """Non-finite values where finite ones are required."""


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit code.

    Args:
        error: Exception raised while running a command

    Returns:
        1 for usage errors, 2 for data errors, 3 for numeric and unexpected failures
    """
    if isinstance(error, ConfigError):
        return EXIT_USAGE
    if isinstance(error, (DataFormatError, DimensionError, CapacityError, ModeError, OSError)):
        return EXIT_DATA
    return EXIT_NUMERIC


def error_envelope(error: BaseException) -> Dict[str, Any]:
    """
    Build the failed-command envelope returned by every tool.

    Args:
        error: Exception caught at the tool boundary

    Returns:
        Envelope dictionary with success flag, message, error type and exit code
    """
    return {
        "success": False,
        "error": str(error),
        "error_type": type(error).__name__,
        "exit_code": exit_code_for(error),
        "result": None,
    }
