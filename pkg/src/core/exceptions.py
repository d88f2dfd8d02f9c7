"""
Unified exception hierarchy for fencewire.

All custom exceptions inherit from FencewireException for easier
exception handling and to distinguish application errors from system errors.
"""

from typing import List, Optional


class FencewireException(Exception):
    """Base exception for all application errors."""
    pass


# ============================================================================
# Configuration errors
# ============================================================================

class ConfigurationError(FencewireException):
    """Base class for configuration-related errors."""

    def __init__(self, message: str) -> None:
        super().__init__(message)


class ConfigLoadError(ConfigurationError):
    """The config file had a problem when loading."""
    pass


class ConfigSaveError(ConfigurationError):
    """The config file could not be saved."""
    pass


class ConfigCreationError(ConfigurationError):
    """The config file could not be created."""
    pass


class ScenarioValidationError(ConfigurationError):
    """A scenario failed validation; every problem is listed with its field path."""

    def __init__(self, errors: List[str]) -> None:
        self.errors = list(errors)
        super().__init__("Scenario validation failed:\n  " + "\n  ".join(self.errors))


class InvalidArgumentError(FencewireException, ValueError):
    """An operation received an input outside its domain."""
    pass


# ============================================================================
# Channel (CIoT) errors
# ============================================================================

class ChannelError(FencewireException):
    """Base class for cloud channel errors."""

    def __init__(self, message: str) -> None:
        super().__init__(message)


class AuthError(ChannelError):
    """The API key does not match the channel."""
    pass


class NotFoundError(ChannelError):
    """The requested channel does not exist."""
    pass


class BadRequestError(ChannelError):
    """The request carried a malformed field slot or parameter."""
    pass


class TransportError(ChannelError):
    """
    The endpoint could not be reached or answered unexpectedly.

    Nothing retries automatically; callers decide using the metadata.
    """

    def __init__(self, message: str, endpoint: str = "", retryable: bool = True,
                 retry_after: Optional[float] = None, status_code: Optional[int] = None) -> None:
        super().__init__(message)
        self.endpoint = endpoint
        self.retryable = retryable
        self.retry_after = retry_after
        self.status_code = status_code


class DecodeError(FencewireException):
    """A channel entry carried no slot belonging to the fence."""
    pass


# ============================================================================
# Report errors
# ============================================================================

class ReportError(FencewireException):
    """Base class for report emission and replay errors."""

    def __init__(self, message: str) -> None:
        super().__init__(message)


class ReportWriteError(ReportError):
    """The output directory could not be written."""
    pass


class SchemaError(ReportError):
    """A stored run trace does not match the expected layout."""
    pass


class SchemaVersionError(SchemaError):
    """A stored run trace was written by a different schema version."""

    def __init__(self, found: object, expected: int) -> None:
        super().__init__(
            f"Unsupported run.csv schema version {found!r}; this build reads version {expected}")
        self.found = found
        self.expected = expected


# ============================================================================
# Broker process errors
# ============================================================================

class BrokerStartError(FencewireException):
    """The broker could not be started."""
    pass


class PortInUseError(BrokerStartError):
    """The requested broker port is already bound."""
    pass


# ============================================================================
# Run errors
# ============================================================================

class RunFaultError(FencewireException):
    """A component of a run failed; the run was aborted."""

    def __init__(self, message: str, errors: Optional[List[BaseException]] = None) -> None:
        super().__init__(message)
        self.errors = list(errors or [])
