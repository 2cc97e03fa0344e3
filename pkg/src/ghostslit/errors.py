"""Exception types raised across the package."""


class GhostSlitError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GhostSlitError, ValueError):
    """A physical parameter is outside its valid domain."""


class SamplingError(GhostSlitError, ValueError):
    """A sampling grid is too coarse, too narrow, or cannot be padded enough."""


class GeometryError(GhostSlitError, ValueError):
    """An aperture does not fit the sampling grid."""


class InsufficientDataError(GhostSlitError, ValueError):
    """A histogram carries too little information for the requested estimate."""


class FitError(GhostSlitError, RuntimeError):
    """A model fit failed or produced parameters inconsistent with the model."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EPRRegimeWarning(UserWarning):
    """Emitted when a sigma_p >> sigma_q approximation is used outside that regime."""
