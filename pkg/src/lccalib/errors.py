"""Exception hierarchy shared across the toolkit."""


class CalibrationError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(CalibrationError):
    """A file does not conform to its documented schema."""


class NonConvergenceError(CalibrationError):
    """An iterative numeric routine failed to converge."""


class DegenerateSampleError(CalibrationError):
    """A minimal sample is too degenerate to fit a model."""


class InsufficientCorrespondencesError(CalibrationError):
    """Fewer 2D-3D correspondences than the estimator requires."""


class NoOverlapError(CalibrationError):
    """No LiDAR point projects into the camera image at the given transform."""


class InsufficientOverlapError(CalibrationError):
    """Too few valid residuals to align a scan against the map."""


class CalibrationFailedError(CalibrationError):
    """Fine registration could not proceed on any data pair."""
