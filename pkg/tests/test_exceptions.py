import logging

import pytest
from pydantic import BaseModel, ValidationError

from gsgw.exceptions.exceptions import (
    ConfigError,
    ConnectivityError,
    DegenerateInputError,
    InternalConsistencyError,
    InvalidInputError,
    NumericError,
    OptimizationFailureError,
    ParseError,
    ShapeError,
    SizeError,
    UnsupportedMarginalsError,
)
from gsgw.exceptions.handlers import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_UNEXPECTED,
    exit_code_for,
    handle_cli_exception,
)


class _Model(BaseModel):
    steps: int


def _validation_error():
    try:
        _Model(steps="many")
    except ValidationError as exc:
        return exc


class TestExitCodes:
    @pytest.mark.parametrize("exc,code", [
        (ConfigError("bad key"), EXIT_CONFIG),
        (InvalidInputError("tau"), EXIT_CONFIG),
        (ShapeError("shape"), EXIT_CONFIG),
        (SizeError("too big"), EXIT_CONFIG),
        (DegenerateInputError("dupes"), EXIT_CONFIG),
        (UnsupportedMarginalsError("weights"), EXIT_CONFIG),
        (NumericError("nan"), EXIT_NUMERIC),
        (OptimizationFailureError("diverged"), EXIT_NUMERIC),
        (InternalConsistencyError("negative loss"), EXIT_NUMERIC),
        (ParseError("bad face", path="a.off", line=3), EXIT_IO),
        (ConnectivityError("split", [3, 2]), EXIT_IO),
        (FileNotFoundError("gone"), EXIT_IO),
        (RuntimeError("surprise"), EXIT_UNEXPECTED),
    ])
    def test_mapping(self, exc, code):
        assert exit_code_for(exc) == code

    def test_pydantic_validation_is_a_config_error(self):
        assert exit_code_for(_validation_error()) == EXIT_CONFIG

    def test_subclass_resolves_through_mro(self):
        class StrictShapeError(ShapeError):
            pass

        assert exit_code_for(StrictShapeError("x")) == EXIT_CONFIG


class TestMessages:
    def test_parse_error_location(self):
        exc = ParseError("bad number", path="mesh.off", line=7)
        assert str(exc) == "mesh.off, line 7: bad number"
        assert ParseError("bad magic", offset=0).offset == 0

    def test_connectivity_sizes(self):
        exc = ConnectivityError("graph split", [4, 2])
        assert exc.component_sizes == [4, 2]
        assert "[4, 2]" in str(exc)


class TestHandler:
    def test_domain_exception_logged_as_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="gsgw.exceptions.handlers"):
            code = handle_cli_exception(NumericError("loss is nan"), "solve")
        assert code == EXIT_NUMERIC
        assert "NumericError: loss is nan" in caplog.text
        assert caplog.records[-1].command == "solve"

    def test_empty_message_falls_back_to_default(self, caplog):
        with caplog.at_level(logging.WARNING, logger="gsgw.exceptions.handlers"):
            handle_cli_exception(SizeError(), "baseline")
        assert "Instance too large for exhaustive oracle" in caplog.text

    def test_unexpected_exception_logged_as_error(self, caplog):
        with caplog.at_level(logging.ERROR, logger="gsgw.exceptions.handlers"):
            code = handle_cli_exception(KeyError("x"), "bench")
        assert code == EXIT_UNEXPECTED
        assert caplog.records[-1].levelname == "ERROR"
        assert caplog.records[-1].exc_info is not None
