"""Exception types shared across the package."""


class SatxError(Exception):
    """Base class for all package errors."""


class ConfigError(SatxError):
    """Invalid configuration, schema violation, or inconsistent job setup."""


class GeometryError(SatxError):
    """Invalid direction, cloud, or layout geometry."""


class CoverageError(SatxError):
    """A direction cannot be panned with the available loudspeaker hull."""


class DimensionError(SatxError):
    """Matrix dimensions do not match the declared formats."""


class MatrixFileError(SatxError):
    """Malformed or inconsistent matrix file."""


class AudioError(SatxError):
    """Unsupported or inconsistent audio input."""
