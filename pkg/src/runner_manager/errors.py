"""Exception hierarchy shared by the GitHub and Kubernetes clients."""

from __future__ import annotations


class ConfigError(Exception):
    """Invalid or incomplete configuration; the message names the offender."""


class ApiError(Exception):
    """Base class for classified API failures."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class CredentialError(ApiError):
    """401/403 that is not a rate limit. Never retried."""


class RateLimitedError(ApiError):
    """429 or 403-with-exhausted-quota; carries the server-indicated wait."""

    def __init__(self, message: str, status: int | None = None, retry_after: float | None = None):
        super().__init__(message, status)
        self.retry_after = retry_after


class TransientError(ApiError):
    """5xx or transport-level failure; safe to retry later."""


class ProtocolError(ApiError):
    """Response arrived but its body does not match the documented shape."""


class MissingDeploymentError(ApiError):
    """The pre-declared runner Deployment does not exist (404). Fatal."""
