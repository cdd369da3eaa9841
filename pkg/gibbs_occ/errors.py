"""Exception hierarchy shared by the library, the CLI and the HTTP layer."""

from typing import Any, Dict


class GibbsOccError(Exception):
    """Base class for every error raised by gibbs_occ."""

    code = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details


class DomainError(GibbsOccError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    code = "domain_error"


class ContractError(GibbsOccError, ValueError):
    """Structural contract broken by the caller (sums, shapes, mismatched tables)."""

    code = "contract_violation"


class WeightsExhaustedError(DomainError):
    """A finite custom weight list was asked for an order it does not supply."""

    code = "weights_exhausted"


class UnsupportedFamilyError(DomainError):
    """The weight family has no Lévy tail implementation."""

    code = "unsupported_family"


class InstanceTooLargeError(GibbsOccError):
    """Enumeration, exact or verification route refused for size."""

    code = "instance_too_large"


class DiagnosticError(GibbsOccError):
    """A numerical procedure could not certify its result."""

    code = "diagnostic_failure"


class ConfigurationError(GibbsOccError):
    """Invalid settings."""

    code = "configuration_error"


# CLI exit codes
EXIT_OK = 0
EXIT_STATISTICAL = 1
EXIT_USAGE = 2


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit-code contract."""
    if isinstance(exc, DiagnosticError):
        return EXIT_STATISTICAL
    return EXIT_USAGE


def error_payload(exc: BaseException) -> Dict[str, Any]:
    """Machine-readable error document."""
    if isinstance(exc, GibbsOccError):
        payload: Dict[str, Any] = {"error": exc.code, "message": exc.message}
        if exc.details:
            payload["details"] = {key: str(value) for key, value in exc.details.items()}
        return payload
    return {"error": "usage_error", "message": str(exc)}
