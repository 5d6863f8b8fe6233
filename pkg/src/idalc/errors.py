"""Exception types shared across the package."""


class IdalcError(Exception):
    """Base class for all errors raised by this package."""


class DataError(IdalcError):
    """Malformed or inconsistent input data (corpus files, splits, ids)."""


class ConfigError(IdalcError):
    """Invalid run configuration or unknown override key."""


class PhaseError(IdalcError):
    """Failure inside one pipeline phase, tagged with the phase name."""

    def __init__(self, phase: str, cause: Exception):
        super().__init__(f"[{phase}] {cause}")
        self.phase = phase
        self.cause = cause
