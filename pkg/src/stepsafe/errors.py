"""Exception hierarchy shared across the package."""


class StepsafeError(Exception):
    """Base class for all package errors."""


class ValidationError(StepsafeError, ValueError):
    """A parameter is outside its documented range or contract."""


class ExtentError(ValidationError):
    """A planar query fell outside the terrain extent."""


class DegenerateRaycastError(ValidationError):
    """Sensor placed at or below the terrain surface."""
