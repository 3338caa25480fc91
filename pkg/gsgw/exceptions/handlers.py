"""Exception handlers for the command-line entry point."""
from typing import Dict, Optional, Tuple, Type

from pydantic import ValidationError

from gsgw.exceptions.exceptions import (
    InvalidInputError,
    ShapeError,
    SizeError,
    NumericError,
    DegenerateInputError,
    UnsupportedMarginalsError,
    OptimizationFailureError,
    ConfigError,
    InternalConsistencyError,
    ParseError,
    ConnectivityError,
)
from gsgw.core.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

# Map domain exceptions to process exit codes
exception_mapping: Dict[Type[BaseException], Tuple[int, str]] = {
    ConfigError: (EXIT_CONFIG, "Invalid configuration"),
    ValidationError: (EXIT_CONFIG, "Invalid configuration value"),
    InvalidInputError: (EXIT_CONFIG, "Invalid input"),
    ShapeError: (EXIT_CONFIG, "Inconsistent shapes"),
    SizeError: (EXIT_CONFIG, "Instance too large for exhaustive oracle"),
    DegenerateInputError: (EXIT_CONFIG, "Degenerate input"),
    UnsupportedMarginalsError: (EXIT_CONFIG, "Unsupported marginals"),
    NumericError: (EXIT_NUMERIC, "Numeric failure"),
    OptimizationFailureError: (EXIT_NUMERIC, "Optimization failed"),
    InternalConsistencyError: (EXIT_NUMERIC, "Internal consistency check failed"),
    ParseError: (EXIT_IO, "Could not parse input file"),
    ConnectivityError: (EXIT_IO, "Disconnected neighbourhood graph"),
    OSError: (EXIT_IO, "File system error"),
}


def exit_code_for(exc: BaseException) -> int:
    """
    Resolve the exit code of an exception, walking its MRO.

    Args:
        exc: Raised exception

    Returns:
        Process exit code
    """
    for klass in type(exc).__mro__:
        if klass in exception_mapping:
            return exception_mapping[klass][0]
    return EXIT_UNEXPECTED


def handle_cli_exception(exc: BaseException, command: Optional[str] = None) -> int:
    """
    Log an exception raised by a command and return the exit code.

    Args:
        exc: Raised exception
        command: Name of the running command

    Returns:
        Process exit code
    """
    code = exit_code_for(exc)
    if code == EXIT_UNEXPECTED:
        logger.error(
            f"Unexpected error: {str(exc)}",
            extra={"command": command},
            exc_info=exc,
        )
        return code

    default_message = next(
        message for klass, (_, message) in exception_mapping.items() if isinstance(exc, klass)
    )
    message = str(exc) if str(exc) else default_message
    logger.warning(
        f"Domain exception: {type(exc).__name__}: {message}",
        extra={"command": command},
    )
    return code
