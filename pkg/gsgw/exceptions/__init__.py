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

__all__ = [
    "InvalidInputError",
    "ShapeError",
    "SizeError",
    "NumericError",
    "DegenerateInputError",
    "UnsupportedMarginalsError",
    "OptimizationFailureError",
    "ConfigError",
    "InternalConsistencyError",
    "ParseError",
    "ConnectivityError",
]
