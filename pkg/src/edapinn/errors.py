"""Exception types shared across the package."""


class EdaPinnError(Exception):
    """Base class for all package errors."""


class ContractError(EdaPinnError):
    """A caller violated an operation's precondition (shape mismatch, empty input, ...)."""


class NumericError(EdaPinnError):
    """A numeric-domain failure: non-finite values, singular systems."""


class ConfigError(EdaPinnError):
    """Invalid configuration value or config-file structure."""


class DataFormatError(EdaPinnError):
    """Malformed tabular data. Carries the offending row when known."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class CheckpointError(EdaPinnError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class CheckpointSchemaError(CheckpointError):
    """Checkpoint file parses but does not match the expected schema."""


class CheckpointReadError(CheckpointError):
    """Checkpoint file is unreadable or not valid JSON."""
