"""Exception hierarchy shared by every bevkit module."""


class BevkitError(Exception):
    """Base class for all bevkit errors."""


class DegeneratePlaneError(BevkitError, ValueError):
    """The projection plane is at or above the camera."""


class DegenerateGeometryError(BevkitError, ValueError):
    """Camera pose or grid produces a singular or ill-defined mapping."""


class FrameMismatchError(BevkitError, ValueError):
    """Image-view and BEV data were mixed in one call."""


class DimensionMismatchError(BevkitError, ValueError):
    """Two rasters that must share a shape do not."""


class KernelTooLargeError(BevkitError, ValueError):
    """Risk kernel radius exceeds the BEV raster."""


class UndefinedMetricError(BevkitError):
    """Chamfer distance requested with exactly one empty point set."""


class InfeasibleConfigError(BevkitError, ValueError):
    """Simulator cannot place the requested persons."""
