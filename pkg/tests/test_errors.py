import pytest
from pydantic import BaseModel, ValidationError

from bnpl.errors import (
    EX_CONFIG,
    EX_DATAERR,
    EX_FAILED,
    EX_NOINPUT,
    EX_SOFTWARE,
    EX_USAGE,
    BnplError,
    ConfigurationError,
    DataValidationError,
    DiagnosticFailure,
    DomainError,
    SamplerInternalError,
    exit_code_for_error,
)


class _Strict(BaseModel):
    n: int


@pytest.mark.unit
class TestBnplErrors:
    """Simple test suite for the error hierarchy."""

    def test_error_inheritance(self):
        error = DataValidationError("bad row")
        assert isinstance(error, DomainError)
        assert isinstance(error, ValueError)
        assert isinstance(error, BnplError)

    def test_error_code_is_appended(self):
        error = BnplError("Test error", error_code="TEST_CODE")
        assert str(error) == "Test error [TEST_CODE]"
        assert error.error_code == "TEST_CODE"

    def test_data_error_prefixes_line_number(self):
        error = DataValidationError(
            "duplicate rank 2 in epoch 3",
            line_number=7,
            epoch="3",
            error_code="duplicate_rank",
        )
        assert str(error) == "line 7: duplicate rank 2 in epoch 3 [duplicate_rank]"
        assert error.epoch == "3"

    def test_field_errors_default_to_empty(self):
        assert DataValidationError("x").field_errors == {}

    def test_long_details_are_truncated(self):
        error = SamplerInternalError("broken", details={"trace": "x" * 2000})
        assert error.details["trace"].endswith("... [truncated]")
        assert len(error.details["trace"]) < 600

    def test_nested_details_are_truncated(self):
        error = BnplError("x", details=[{"a": "y" * 600}])
        assert error.details[0]["a"].endswith("... [truncated]")


@pytest.mark.unit
class TestExitCodes:
    def test_error_classes_map_to_exit_codes(self):
        test_cases = [
            (DataValidationError("x"), EX_DATAERR),
            (DomainError("x"), EX_USAGE),
            (ConfigurationError("x"), EX_CONFIG),
            (DiagnosticFailure("x"), EX_FAILED),
            (SamplerInternalError("x"), EX_SOFTWARE),
            (FileNotFoundError("x"), EX_NOINPUT),
            (RuntimeError("x"), EX_SOFTWARE),
        ]
        for error, expected in test_cases:
            assert exit_code_for_error(error) == expected

    def test_pydantic_validation_error_is_a_config_error(self):
        with pytest.raises(ValidationError) as exc_info:
            _Strict(n="not a number")
        assert exit_code_for_error(exc_info.value) == EX_CONFIG
