from typing import Any

from pydantic import ValidationError as PydanticValidationError

_MAX_DETAIL_LENGTH = 500


def _truncate_details(details: Any) -> Any:
    """Keep error payloads printable.

    - Recurses into dicts and lists
    - Truncates long strings to _MAX_DETAIL_LENGTH chars
    """
    if isinstance(details, dict):
        return {k: _truncate_details(v) for k, v in details.items()}
    if isinstance(details, list):
        return [_truncate_details(v) for v in details]
    if isinstance(details, str) and len(details) > _MAX_DETAIL_LENGTH:
        return details[:_MAX_DETAIL_LENGTH] + "... [truncated]"
    return details


class BnplError(Exception):
    """
    Base class for all bnpl errors.
    """

    def __init__(
        self,
        message: str,
        *,
        error_code: str | None = None,
        details: Any | None = None,
    ) -> None:
        super().__init__(message)
        self.error_code = error_code
        self.details = _truncate_details(details)

    def __str__(self) -> str:
        parts = [super().__str__()]
        if self.error_code:
            parts.append(f"[{self.error_code}]")
        return " ".join(parts)


# ---- Argument / domain errors -----------------------------------------------
class DomainError(BnplError, ValueError):
    """Argument outside the domain of a closed form or sampler."""


class DataValidationError(DomainError):
    """Malformed rankings or ranking files."""

    def __init__(
        self,
        *args: Any,
        line_number: int | None = None,
        epoch: str | None = None,
        field_errors: dict[str, str] | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(*args, **kwargs)
        self.line_number = line_number
        self.epoch = epoch
        self.field_errors = field_errors or {}

    def __str__(self) -> str:
        text = super().__str__()
        if self.line_number is not None:
            text = f"line {self.line_number}: {text}"
        return text


# ---- Configuration ----------------------------------------------------------
class ConfigurationError(BnplError):
    """Sampler settings that cannot produce a valid chain."""


# ---- Internal sampler issues ------------------------------------------------
class SamplerInternalError(BnplError):
    """Broken latent-state invariant, n_k = 0 fixed atom, etc."""


class DiagnosticFailure(BnplError):
    """An oracle check ran to completion but did not pass."""


# ---- Exit code mapping ------------------------------------------------------
EX_FAILED = 1
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66
EX_SOFTWARE = 70
EX_CONFIG = 78


def exit_code_for_error(exc: BaseException) -> int:
    """Map an exception raised by a CLI command to a process exit code."""
    error_map: list[tuple[type[BaseException], int]] = [
        (DataValidationError, EX_DATAERR),
        (DomainError, EX_USAGE),
        (ConfigurationError, EX_CONFIG),
        (PydanticValidationError, EX_CONFIG),
        (DiagnosticFailure, EX_FAILED),
        (SamplerInternalError, EX_SOFTWARE),
        (FileNotFoundError, EX_NOINPUT),
    ]
    for error_class, code in error_map:
        if isinstance(exc, error_class):
            return code
    return EX_SOFTWARE
