"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value or malformed config file."""


class ShapeError(ValueError):
    """Mismatched array shapes or unaligned list lengths."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite intermediate value."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class NumericDivergenceError(NumericError):
    """Training aborted because the cost became non-finite."""

    def __init__(self, iteration, message=None):
        super().__init__(message or f"non-finite cost at iteration {iteration}")
        self.iteration = iteration


class CheckpointError(Exception):
    """Base class for checkpoint read/write failures."""


class CheckpointFormatError(CheckpointError):
    """File is not a recognizable checkpoint."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written with an unsupported format version."""


class CheckpointShapeError(CheckpointError):
    """Checkpoint dimensions do not match the expected network layout."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint file ended before all parameters could be read."""


class SearchSpaceTooLargeError(ValueError):
    """Grid-search enumeration would exceed the candidate budget."""
