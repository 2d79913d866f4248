"""Exception hierarchy shared across the toolkit.

Exit codes follow the CLI contract: 1 validation error, 2 input error,
3 degenerate analysis input, 4 scoring-service failure.
"""


class ToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    exit_code = 1


class ConfigError(ToolkitError):
    """A run configuration or synthetic spec fails validation."""

    exit_code = 1


class InputError(ToolkitError):
    """An input file is missing, unreadable, or fatally malformed."""

    exit_code = 2


class DataIntegrityError(InputError):
    """Inputs that should agree do not (e.g. an author absent from a partition)."""

    exit_code = 2


class InvalidUrlError(InputError):
    """A raw URL has no extractable host. Recoverable at the call site."""

    exit_code = 2


class DomainError(ToolkitError):
    """An operation was called outside its mathematical domain."""

    exit_code = 3


class DegenerateInputError(DomainError):
    """Input is formally valid but statistically degenerate (e.g. all values tied)."""

    exit_code = 3


class ServiceError(ToolkitError):
    """The external scoring service failed."""

    exit_code = 4


class ProtocolError(ServiceError):
    """The scoring service answered with something outside its contract."""

    exit_code = 4


class ScoreUnavailableError(ServiceError):
    """No score could be obtained after retries; the user is skipped and counted."""

    exit_code = 4
