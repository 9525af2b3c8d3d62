"""Exception types shared across the package."""


class LatentShiftError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(LatentShiftError, ValueError):
    """Array shape or vector length does not match the declared contract."""


class ValidationError(LatentShiftError, ValueError):
    """Input values violate a precondition (range, finiteness, emptiness)."""


class DivergenceError(LatentShiftError, RuntimeError):
    """An iterative optimization produced a non-finite loss.

    ``step`` is the 0-based optimization step at which the loss first
    became non-finite.
    """

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class CheckpointError(LatentShiftError, RuntimeError):
    """Base class for checkpoint persistence failures."""


class CheckpointFormatError(CheckpointError):
    """File does not start with the expected magic bytes or manifest is garbled."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint declares a format version this code does not read."""


class CheckpointTruncationError(CheckpointError):
    """Tensor blob is shorter than the manifest declares."""


class ConfigError(LatentShiftError, ValueError):
    """Benchmark / CLI configuration is invalid or references missing files."""
