"""Exception hierarchy shared by all protoshift modules.

Two broad families matter for the CLI exit-code contract: numeric failures
(degenerate values, incompatible shapes) and data-format failures (bad
container bytes, inconsistent manifests). See ``protoshift.cli`` for the
exit-code mapping.
"""


class ProtoshiftError(Exception):
    """Base class for all errors raised by this package."""


class NumericError(ProtoshiftError):
    """A computation received or produced numerically invalid data."""


class ZeroNorm(NumericError):
    """A vector with (near-)zero L2 norm cannot be normalized."""


class NonFinite(NumericError):
    """NaN or Inf encountered where finite values are required."""


class DimMismatch(NumericError):
    """Embedding dimensions of two operands do not agree."""


class ShapeMismatch(NumericError):
    """Array shapes of two structured operands do not agree."""


class InvalidK(NumericError):
    """View-selection count k is outside [1, n]."""


class DataFormatError(ProtoshiftError):
    """A file or document does not conform to its schema."""


class FormatError(DataFormatError):
    """Malformed TPSE container bytes.

    ``offset`` points at the first offending byte when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NormError(DataFormatError):
    """Stored rows are not unit-norm; the file was not produced here."""


class ClassMismatch(DataFormatError):
    """Prompt groups or manifests disagree on the class set."""


class ManifestError(DataFormatError):
    """A dataset manifest is missing fields or references missing files."""
