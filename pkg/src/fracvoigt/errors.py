"""Exception hierarchy shared across the package."""


class FvgtError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FvgtError, ValueError):
    """Invalid parameters or configuration.

    ``errors`` holds every problem found, not just the first one.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class InstabilityError(FvgtError, ArithmeticError):
    """Raised when a time integration produces non-finite or runaway coefficients."""

    def __init__(self, message, t, step_index):
        self.t = t
        self.step_index = step_index
        super().__init__(f"{message} (t={t!r}, step={step_index})")


class FormatError(FvgtError):
    """Malformed or unsupported on-disk data."""


class StudyError(FvgtError):
    """A multi-run study could not produce a meaningful result."""


class ConfigNotFoundError(FvgtError, FileNotFoundError):
    """The configuration file does not exist."""


class ConfigParseError(FvgtError, ValueError):
    """The configuration file is not valid INI text."""


class HeaderMismatchError(FormatError):
    """A time-series file does not carry the expected column header."""


class BadMagicError(FormatError):
    """A checkpoint file does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """An on-disk format version this code does not read."""


class TruncatedFileError(FormatError):
    """A file ended before its declared payload."""
