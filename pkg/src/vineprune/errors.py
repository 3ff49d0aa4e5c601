"""Exception hierarchy shared by every stage of the pipeline."""


class VinePruneError(Exception):
    """Base class for all errors raised by vineprune."""


class ClassMapError(VinePruneError):
    """A COCO category name has no organ class."""


class GeometryError(VinePruneError):
    """A polygon or mask cannot be turned into a usable instance."""


class UsageError(VinePruneError):
    """The caller asked for something the input cannot provide."""


class DimensionError(VinePruneError):
    """Two rasters that must align have different shapes."""


class ConfigError(VinePruneError):
    """A configuration key is unknown or out of range."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class DepthError(VinePruneError):
    """No usable depth value is available."""


class EmptyModelError(VinePruneError):
    """The scene contains no main cordon to root the plant model."""


class AssessmentError(VinePruneError):
    """A pruning region cannot be assessed."""


class VigorUnknown(AssessmentError):
    """No row of the basal cane has valid depth."""


class DegenerateSegment(VinePruneError):
    """The two points defining a segment coincide."""


class CorrectionError(VinePruneError):
    """A pruning point could not be moved onto its organ."""


class SpecError(VinePruneError):
    """A synthetic scene specification is invalid."""


class ScoringError(VinePruneError):
    """Predicted and ground-truth models do not describe the same instances."""
