"""Exception types shared across the library.

Every error carries a stable ``code`` (its class name) plus an optional
``context`` dict, so callers such as the CLI can emit machine-readable
diagnostics without parsing message strings.
"""

from __future__ import annotations


class LatentVsrError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}

    @property
    def code(self) -> str:
        return type(self).__name__


# --- file and format errors -------------------------------------------------

class MissingFile(LatentVsrError):
    """A referenced file does not exist."""


class EmptySequence(LatentVsrError):
    """A manifest lists no frames."""


class DimensionMismatch(LatentVsrError):
    """Frames in one sequence disagree on width/height."""


class IoFailure(LatentVsrError):
    """An underlying read/write failed."""


class BadMagic(LatentVsrError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedFile(LatentVsrError):
    """A binary file's size disagrees with its header."""


class NonFiniteData(LatentVsrError):
    """A decoded payload contains NaN or Inf samples."""


# --- parameter and shape errors ----------------------------------------------

class ShapeMismatch(LatentVsrError):
    """Two arrays that must agree in shape do not."""


class InvalidParameter(LatentVsrError):
    """A numeric or enum parameter is outside its allowed range."""


class NoiseLevelOutOfRange(LatentVsrError):
    """Input noise level tau is outside [0, tau_max]."""


class DivisionByZeroStep(LatentVsrError):
    """An operation requiring sigma_t > 0 was asked for a step with sigma_t = 0."""


class DimensionNotDivisible(LatentVsrError):
    """Spatial dimensions are not divisible by the required factor."""


class TooSmall(LatentVsrError):
    """An input is smaller than the operation's minimum size."""


class RowOutOfRange(LatentVsrError):
    """A requested pixel row does not exist."""


# --- sequence bookkeeping errors ---------------------------------------------

class MissingFlow(LatentVsrError):
    """A flow pair needed for propagation is absent."""


class FlowCountMismatch(LatentVsrError):
    """len(flows) != T - 1 for a T-frame sequence."""


class AllMasksEmpty(LatentVsrError):
    """Every validity mask in a sequence is empty; a masked mean is undefined."""


class UsageError(LatentVsrError):
    """Bad command line or config input (CLI exit code 2)."""
