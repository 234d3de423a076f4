"""Exception types shared across the package."""


class MaskpropError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(MaskpropError):
    """A file's bytes do not conform to the expected format."""


class ValidationError(MaskpropError):
    """A value violates a documented invariant."""


class DimensionError(MaskpropError):
    """Array shapes are inconsistent with each other or with a config."""


class UndefinedCorrelationError(MaskpropError):
    """Rank correlation is undefined (too few points or zero rank variance)."""
