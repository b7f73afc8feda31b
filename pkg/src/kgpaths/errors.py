"""Exception types shared across the package."""


class KgError(Exception):
    """Base class for all kgpaths errors."""


class ParseError(KgError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UnknownEntityError(KgError):
    pass


class UnknownRelationError(KgError):
    pass


class UnknownItemError(KgError):
    """Embedding lookup failed in file mode."""


class ZeroVectorError(KgError):
    """Cosine or pooling over an all-zero vector."""


class EmptyPathError(KgError):
    pass


class EmptySelectionError(KgError):
    """No candidate survived selection; the retrieval loop reacts with an
    EXPAND diagnostic instead of aborting."""


class EditError(KgError):
    """A graph edit referenced an entity or relation absent from the parent
    graph."""


class ServiceError(KgError):
    """External HTTP service failure.

    ``retryable`` and ``retry_after`` give the caller enough to implement
    backoff without parsing the message.
    """

    def __init__(self, message, retryable=False, retry_after=None, status=None):
        super().__init__(message)
        self.retryable = retryable
        self.retry_after = retry_after
        self.status = status


class CapabilityError(KgError):
    """Reasoner does not support the requested capability (e.g. log-probs)."""


class ConfigError(KgError):
    """Invalid run configuration; maps to CLI exit code 2."""
