"""Exception types shared across the package.

Plain I/O failures (missing files, unreadable paths) are left to the
builtin OSError family; everything that is a contract violation of this
library gets a ProtoclassError subclass so callers can catch precisely.
"""

from __future__ import annotations


class ProtoclassError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVectorError(ProtoclassError):
    """A vector with (near-)zero norm reached an operation that needs a direction."""


class DimMismatchError(ProtoclassError):
    """Operands disagree on dimensionality, or joined sets disagree on record identity."""


class EmptyInputError(ProtoclassError):
    """An operation received an empty collection where at least one element is required."""


class LengthMismatchError(ProtoclassError):
    """Two parallel sequences have different lengths."""


class InsufficientDataError(ProtoclassError):
    """Not enough samples to fit the requested model."""


class FormatError(ProtoclassError):
    """An on-disk file violates the EMB1/manifest/caption contract.

    ``reason`` is one of: badMagic, badVersion, truncated, dimMismatch,
    nonFinite. "truncated" covers any payload-size disagreement (too few
    or too many bytes, or a manifest count that contradicts the header).
    """

    REASONS = ("badMagic", "badVersion", "truncated", "dimMismatch", "nonFinite")

    def __init__(self, reason: str, message: str):
        assert reason in self.REASONS, reason
        self.reason = reason
        super().__init__(f"{reason}: {message}")


class CatalogError(ProtoclassError):
    """A class catalog is malformed or a record references a class outside it."""


class CatalogMismatchError(ProtoclassError):
    """Two sets that must share a catalog do not."""


class UnknownClassError(ProtoclassError):
    """A requested class id is not present in the catalog."""


class MissingClassError(ProtoclassError):
    """A prototype builder found a catalog class with no supporting embeddings."""


class BadTemplateError(ProtoclassError):
    """A prompt template does not contain exactly one "[c]" placeholder."""


class KTooLargeError(ProtoclassError):
    """k exceeds the number of gallery records available for voting."""


class SpecError(ProtoclassError):
    """A synthetic-data specification is out of its documented ranges."""


class CenterSamplingFailedError(ProtoclassError):
    """Rejection sampling could not place class centers within the attempt budget."""


class BatchItemError(ProtoclassError):
    """Wraps a failure on one item of a batch, recording its index."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.__cause__ = cause
        super().__init__(f"item {index}: {cause}")
