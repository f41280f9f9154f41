# melhts/exceptions.py

from typing import Iterable, Optional


class MelHtsError(Exception):
    """
    Base class for every error raised by the toolkit.
    `exit_code` is the process exit status the CLI maps the error to.
    """
    exit_code = 3


class ConfigError(MelHtsError):
    """Invalid or missing configuration (exit 1)."""
    exit_code = 1


class StorageError(MelHtsError):
    """File system or file format problems (exit 2)."""
    exit_code = 2


class FormatError(StorageError):
    """
    A binary file does not match its documented layout.

    Carries the byte offset where decoding failed and, for truncated files,
    the expected and actual lengths.
    """

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None,
                 expected: Optional[int] = None, actual: Optional[int] = None):
        self.path = path
        self.offset = offset
        self.expected = expected
        self.actual = actual
        details = []
        if path is not None:
            details.append(f"path={path}")
        if offset is not None:
            details.append(f"offset={offset}")
        if expected is not None:
            details.append(f"expected_bytes={expected}")
        if actual is not None:
            details.append(f"actual_bytes={actual}")
        super().__init__(f"{message} ({' '.join(details)})" if details else message)


class DataError(MelHtsError):
    """The data violates a precondition of an operation (exit 3)."""
    exit_code = 3


class ParameterError(DataError, ValueError):
    """An argument is out of its valid range. `field` names the argument."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid {field}: {message}")


class InputError(DataError, ValueError):
    """Input data (audio, features, labels) is unusable for the operation."""


class LexiconError(DataError):
    """Words missing from the lexicon, or a malformed lexicon."""

    def __init__(self, message: str, words: Iterable[str] = ()):
        self.words = list(words)
        super().__init__(message)


class AlignmentError(DataError):
    """No feasible left-to-right path exists for the requested alignment."""


class InsufficientDataError(DataError):
    """Training data does not cover the named phones."""

    def __init__(self, message: str, phones: Iterable[str] = ()):
        self.phones = sorted(set(phones))
        super().__init__(message)


class InternalError(MelHtsError):
    """A broken internal invariant; always a bug."""
