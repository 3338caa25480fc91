"""Custom exception classes for the toolkit."""
from typing import Optional, Sequence


class InvalidInputError(Exception):
    """Raised when an argument violates an operation's precondition."""
    pass


class ShapeError(Exception):
    """Raised when array shapes are inconsistent."""
    pass


class SizeError(Exception):
    """Raised when an exhaustive oracle is called beyond its size guard."""
    pass


class NumericError(Exception):
    """Raised when a computation overflows, underflows or produces non-finite values."""
    pass


class DegenerateInputError(Exception):
    """Raised when input geometry is degenerate (duplicate nodes, identical points)."""
    pass


class UnsupportedMarginalsError(Exception):
    """Raised when a method needs uniform or equal-size marginals and gets others."""
    pass


class OptimizationFailureError(Exception):
    """Raised when every restart or retry of an optimization diverges."""
    pass


class ConfigError(Exception):
    """Raised when a run configuration is malformed or has unknown keys."""
    pass


class InternalConsistencyError(Exception):
    """Raised when an internal identity is violated beyond round-off."""
    pass


class ParseError(Exception):
    """Raised when a mesh, array or label file does not follow its grammar."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        offset: Optional[int] = None,
    ):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")


class ConnectivityError(Exception):
    """Raised when a neighbourhood graph splits into several components."""

    def __init__(self, message: str, component_sizes: Sequence[int] = ()):
        self.component_sizes = list(component_sizes)
        super().__init__(f"{message} (component sizes: {self.component_sizes})")
