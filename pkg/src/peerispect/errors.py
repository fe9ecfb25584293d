"""Exception types shared across the pipeline."""


class PeerispectError(Exception):
    """Base class for all engine errors."""


class EmptyInput(PeerispectError):
    """Input text is empty or whitespace-only."""


class InvalidConfig(PeerispectError):
    """A configuration value violates its constraints."""


class EmptyCorpus(PeerispectError):
    """An index was requested over zero passages."""


class DimensionMismatch(PeerispectError):
    """Embedding vectors disagree on dimensionality."""


class MissingIndex(PeerispectError):
    """A retrieval strategy needs an index that was not built."""


class BackendError(PeerispectError):
    """A model backend call failed (after retries, where applicable)."""


class BackendTimeout(BackendError):
    """A model backend call timed out."""


class NotFound(PeerispectError):
    """A remote resource does not exist."""


class NetworkError(PeerispectError):
    """A remote call failed at the transport level."""


class RateLimited(PeerispectError):
    """The remote service throttled us and retries were exhausted."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class ParseError(PeerispectError):
    """A benchmark or fixture file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnknownLabel(ParseError):
    """A verdict label outside the closed four-label set."""


class LengthMismatch(PeerispectError):
    """Paired lists have different lengths."""


class MissingOrigin(PeerispectError):
    """Recall@k needs origin passages but an instance has none."""
