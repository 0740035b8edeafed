"""Exception types shared across the package."""

from __future__ import annotations


class PromptVeilError(Exception):
    """Base class for all package errors."""


class DuplicateIdError(PromptVeilError):
    """Raised when a unit collection contains repeated ids."""


class UnknownEntityError(PromptVeilError):
    """Raised when a payload references entity ids absent from the store."""

    def __init__(self, missing_ids):
        self.missing_ids = list(missing_ids)
        super().__init__(f"unknown entity ids: {self.missing_ids}")


class ProviderError(PromptVeilError):
    """Base class for provider transport and protocol failures."""


class AuthError(ProviderError):
    """Missing or rejected credentials."""


class TimeoutError_(ProviderError):
    """Request exceeded the configured timeout."""


class RateLimitError(ProviderError):
    """Provider signalled throttling (HTTP 429)."""


class MalformedResponseError(ProviderError):
    """Response body did not match the configured field paths."""


class EmptyCompletionError(ProviderError):
    """Provider returned empty text for every retry."""


class DimensionMismatchError(PromptVeilError):
    """Embedding vector length differs from the requested dimension."""


class UnparseableOutputError(PromptVeilError):
    """Inference output matched no member of the closed output set."""

    def __init__(self, raw: str, message: str = "output matched no allowed label"):
        self.raw = raw
        super().__init__(f"{message}: {raw!r}")


class EmptyInputError(PromptVeilError):
    """Metric or pipeline input was empty where data is required."""


class LengthMismatchError(PromptVeilError):
    """Aligned lists of differing lengths."""


class DatasetTooSmallError(PromptVeilError):
    """Baseline sampling needs more items than the dataset holds."""


class NonNumericInputError(PromptVeilError):
    """Discretization received values that cannot be cast to float."""


class ConfigError(PromptVeilError):
    """Invalid or inconsistent configuration document."""
