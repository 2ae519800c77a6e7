"""Exception hierarchy shared by all xqdof modules."""


class XqdofError(Exception):
    """Base class for all errors raised by this package."""


class InvalidAngleError(XqdofError):
    """An angle argument was NaN or infinite."""


class GridMismatchError(XqdofError):
    """Two fields were combined but their grids differ."""


class EmptyMaskError(XqdofError):
    """An operation required at least one shared foreground cell."""


class EmptyMarksError(XqdofError):
    """An operation required at least one orientation mark."""


class OfGridParseError(XqdofError):
    """A .xof document is malformed.

    Carries the 1-based line and column of the offending token when known.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class CodecError(XqdofError):
    """Base class for .xqd encode/decode failures."""


class BadMagicError(CodecError):
    """Buffer does not start with the XQD1 magic."""


class BadVersionError(CodecError):
    """Unsupported format version byte."""


class LengthMismatchError(CodecError):
    """Buffer length disagrees with the counts in its header."""


class CapacityError(CodecError):
    """A model field does not fit the fixed-width header/payload encoding."""
