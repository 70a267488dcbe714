"""Exception hierarchy shared across the package."""


class SurfmapError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SurfmapError):
    """Invalid or inconsistent run configuration."""


class DataError(SurfmapError):
    """Malformed input data (sample streams, grid files)."""


class CollinearPoints(SurfmapError):
    """Plane normal undefined: measurement points are (nearly) collinear."""


class DuplicatePoints(SurfmapError):
    """Fewer than three distinct measurement points."""


class VerticalPlane(SurfmapError):
    """Plane cannot be evaluated as a height function (|n_z| too small)."""


class DegenerateFrame(SurfmapError):
    """Reference point projects onto the plane origin; x-axis undefined."""


class NonPositiveR(SurfmapError):
    """Measurement variance must be strictly positive."""


class MaskShapeMismatch(SurfmapError):
    """Mask raster dimensions do not match the grid."""


class OutOfBounds(SurfmapError):
    """Grid index or coordinate outside the grid extent."""


class OutOfDomain(SurfmapError):
    """Query outside the surface model domain."""


class NoIntersection(SurfmapError):
    """Sensor ray does not hit the surface within range."""


class AreaOutsideDomain(SurfmapError):
    """Requested scan area is not contained in the surface domain."""


class NoCountedCells(SurfmapError):
    """Every evaluation sample was filtered out by the covariance threshold."""
