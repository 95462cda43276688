"""Exception hierarchy shared by every waekit module."""


class WaeError(Exception):
    """Base class for all errors raised by waekit."""


class DomainError(WaeError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class AlignmentError(DomainError):
    """Prediction sets do not cover the same samples."""

    def __init__(self, message, offending_ids=()):
        super().__init__(message)
        self.offending_ids = tuple(offending_ids)


class LabelConflictError(DomainError):
    """Two prediction sets disagree on a sample's ground truth."""


class DegenerateInputError(DomainError):
    """Input is structurally valid but carries a single class (or nothing)."""


class UnsupportedArityError(DomainError):
    """Too many (or too few) models for exhaustive weight enumeration."""


class ContractError(WaeError, RuntimeError):
    """A caller broke a usage contract, e.g. reusing a stale forward cache."""


class ParseError(WaeError, ValueError):
    """A text file could not be parsed; carries path and line context."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = str(path)
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class FormatError(ParseError):
    """A binary file is malformed or has the wrong length."""
