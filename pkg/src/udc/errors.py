"""Exception hierarchy shared across the package."""


class UdcError(Exception):
    """Base class for all package errors."""


class DataError(UdcError):
    """Bad input data: missing files, malformed records, invalid labels."""


class CheckpointError(UdcError):
    """Unreadable or inconsistent checkpoint file."""


class TrainingError(UdcError):
    """Training aborted (for example a non-finite gradient)."""


class ConfigError(UdcError):
    """Invalid run configuration."""


class LabelStoreError(UdcError):
    """Corrupt line in the append-only label store."""
