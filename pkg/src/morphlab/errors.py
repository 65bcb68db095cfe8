"""Exception hierarchy shared across the package."""


class MorphlabError(Exception):
    """Base class for all package-specific errors."""


class LatentShapeError(MorphlabError):
    """Tensor has the wrong rank, row count, or column count."""


class LatentFormatError(MorphlabError):
    """Latent tensor file is corrupt, truncated, or unsupported."""


class DegenerateGeometryError(MorphlabError):
    """Slerp input is numerically degenerate (zero-norm or antipodal row)."""


class SchemaError(MorphlabError):
    """CSV/JSON input violates its declared schema."""


class CoverageError(MorphlabError):
    """Configuration gap: a declared FRS lacks a threshold or FTAR entry."""
