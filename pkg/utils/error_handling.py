"""
Error handling utilities for the hyperbolic clustering toolkit.

This module provides the exception hierarchy, exit-code mapping and input
validation shared by all packages.
"""

import logging
from typing import Optional, Any, Dict

import numpy as np

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PARSE = 2
EXIT_INVALID_CONFIG = 3
EXIT_NUMERICAL = 4


class HypGCDError(Exception):
    """Base exception for toolkit errors."""

    exit_code = EXIT_UNEXPECTED

    def __init__(self, message: str, exit_code: Optional[int] = None, details: Optional[Dict] = None):
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ValidationError(HypGCDError):
    """Raised when arguments, configuration or flag combinations are invalid."""

    exit_code = EXIT_INVALID_CONFIG


class ParseError(HypGCDError):
    """Raised when an input file is malformed."""

    exit_code = EXIT_PARSE

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 path: Optional[str] = None):
        self.line = line
        self.column = column
        self.path = path
        location = ""
        if path:
            location += f"{path}:"
        if line is not None:
            location += f"{line}:"
            if column is not None:
                location += f"{column}:"
        full = f"{location} {message}" if location else message
        super().__init__(full, details={"line": line, "column": column, "path": path})


class NumericalError(HypGCDError):
    """Raised when a computation cannot be carried out in floating point."""

    exit_code = EXIT_NUMERICAL


class ManifoldError(NumericalError):
    """Raised when a point does not lie on the hyperboloid."""
    pass


class BoundaryError(NumericalError):
    """Raised when a ball-model point is too close to the boundary to lift."""
    pass


class DegenerateError(NumericalError):
    """Raised for degenerate centroid norms or coincident exterior-angle pairs."""
    pass


class ExpMapOverflowError(NumericalError):
    """Raised when the exponential map would overflow."""
    pass


class EmptyClusterError(NumericalError):
    """Raised when initialization cannot provide enough distinct centroids."""
    pass


class DivergenceError(NumericalError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})", details={"step": step})


class ErrorHandler:
    """Maps exceptions to exit codes and checks numeric results."""

    @staticmethod
    def exit_code_for(exception: BaseException) -> int:
        """
        Exit code for an exception raised by a CLI command.

        Args:
            exception (BaseException): The exception to classify

        Returns:
            int: 2 for parse errors, 3 for invalid config, 4 for numerical
                failures, 1 for anything else
        """
        if isinstance(exception, HypGCDError):
            return exception.exit_code
        return EXIT_UNEXPECTED

    @staticmethod
    def check_finite(values: Any, what: str, error: type = NumericalError) -> np.ndarray:
        """
        Ensure an array contains only finite numbers.

        Args:
            values (Any): Array-like to check
            what (str): Name used in the error message
            error (type): Exception class raised on failure

        Returns:
            np.ndarray: The values as a float array

        Raises:
            NumericalError: If any value is NaN or infinite (or ``error``)
        """
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            bad = int(np.count_nonzero(~np.isfinite(arr)))
            raise error(f"{what} contains {bad} non-finite value(s)")
        return arr


def validate_input(data: Any, required_fields: list, data_type: str = "input") -> None:
    """
    Validate a configuration mapping for required fields.

    Args:
        data (Any): The data to validate
        required_fields (list): List of required field names
        data_type (str): Type of data for error messages

    Raises:
        ValidationError: If required fields are missing
    """
    if not isinstance(data, dict):
        raise ValidationError(f"{data_type} must be a dictionary")

    missing_fields = [field for field in required_fields if field not in data]
    if missing_fields:
        raise ValidationError(f"Missing required fields in {data_type}: {missing_fields}")


def require(condition: bool, message: str) -> None:
    """Raise ValidationError with ``message`` unless ``condition`` holds."""
    if not condition:
        raise ValidationError(message)
