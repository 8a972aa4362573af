"""Exception hierarchy shared across the package."""


class DagChoiceError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DagChoiceError, ValueError):
    """Invalid bounds, dimensions, selectors or option combinations."""


class DataError(DagChoiceError, ValueError):
    """Malformed or inconsistent input data.

    ``lines`` holds the offending line numbers (1-based, header is line 1)
    when the error comes from a file.
    """

    def __init__(self, message, lines=None):
        super().__init__(message)
        self.lines = list(lines or [])


class MappingError(DagChoiceError, ValueError):
    """A subset/path cannot be mapped onto a DAG."""


class ModelError(DagChoiceError, RuntimeError):
    """The model is undefined for the given inputs (e.g. no feasible path)."""


class GuardError(DagChoiceError, RuntimeError):
    """Brute-force enumeration refused because the choice set is too large."""

    def __init__(self, message, size):
        super().__init__(message)
        self.size = size
