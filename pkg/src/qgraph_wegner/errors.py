"""Exception types raised across the package."""


class QGraphError(Exception):
    """Base class for all package errors."""


class InputError(QGraphError, ValueError):
    """Malformed or inconsistent input."""


class CapabilityError(QGraphError):
    """Requested feature lies outside the supported family."""


class ResourceError(QGraphError):
    """Problem size exceeds a configured cap."""


class AccuracyError(QGraphError):
    """Requested energy exceeds what the discretization can resolve."""


class PrecisionError(QGraphError):
    """Numerical quantity is ill-defined at the requested point."""
