"""Exception types shared across the package."""


class SolarcastError(Exception):
    """Base class for all package-specific errors."""


class EphemerisRangeError(SolarcastError):
    """Timestamp outside the validity window of the solar ephemeris."""


class CsvParseError(SolarcastError):
    """A CSV row could not be parsed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OrderingError(SolarcastError):
    """Timestamps are not strictly increasing."""


class CadenceError(SolarcastError):
    """Sampling interval is inconsistent or unsupported."""


class InsufficientDataError(SolarcastError):
    """A series is too short for the requested operation."""


class DimensionError(SolarcastError):
    """Array arguments have incompatible shapes."""


class UnstableModelError(SolarcastError):
    """No stationary/invertible model could be fitted."""


class FitTimeoutError(SolarcastError):
    """Model training exceeded its wall-clock budget."""


class EmptyNeighborhoodError(SolarcastError):
    """A distance-threshold neighborhood contains no reference patterns."""


class ConfigError(SolarcastError):
    """Invalid run configuration or command-line arguments."""
