"""
Enumeration types for the loop soup engine.

These enums provide type-safe constants for mark kinds, domains, estimator
kinds, result flags, error codes and output options throughout the package.
"""

from enum import Enum


class LogLevel(Enum):
    """Logging severity levels."""

    DEBUG = "debug"
    INFO = "info"
    WARN = "warn"
    ERROR = "error"


class MarkKind(Enum):
    """Shipped families of loop mark distributions."""

    BERNOULLI = "bernoulli"
    LATTICE = "lattice"
    GAUSSIAN = "gaussian"
    UNIT_VECTOR = "unit_vector"
    CUSTOM = "custom"


class Domain(Enum):
    """Domain in which correlators are evaluated."""

    PLANE = "plane"
    UPPER_HALF_PLANE = "upper_half_plane"


class VertexKind(Enum):
    """Which loop count the vertex operator exponentiates."""

    LAYERING = "layering"
    WINDING = "winding"


class EstimatorKind(Enum):
    """Monte Carlo estimators offered by the sampler."""

    ALPHA = "alpha"
    WINDING = "winding"
    VERTEX_LAYERING = "vertex-layering"
    VERTEX_WINDING = "vertex-winding"
    SUBSETS = "subsets"


class OutputFormat(Enum):
    """Machine-readable output formats of the CLI."""

    JSON = "json"
    CSV = "csv"


class ResultFlag(Enum):
    """Machine-readable flags attached to correlator results."""

    CHARGE_VIOLATION = "vanishes_by_charge_conservation"
    INTEGRAL_REPRESENTATION = "integral_representation_used"


class ErrorCode(Enum):
    """Error codes carried by LoopSoupError instances."""

    INVALID_DISTRIBUTION = "invalid_distribution"
    INVALID_ARGUMENT = "invalid_argument"
    INVALID_CONFIG = "invalid_config"
    OUT_OF_DOMAIN = "out_of_domain"
    SINGULAR_POINT = "singular_point"
    COINCIDENT_POINTS = "coincident_points"
    ACCURACY_NOT_REACHED = "accuracy_not_reached"
    DEGENERATE_GRAM = "degenerate_gram"
    DEGENERATE_DIMENSION = "degenerate_dimension"
    NEGATIVE_WEIGHT = "negative_weight"
    UNSUPPORTED_LABEL = "unsupported_label"
    ORDER_TOO_LARGE = "order_too_large"
    INDETERMINATE_ENCLOSURE = "indeterminate_enclosure"
    ON_BOUNDARY = "on_boundary"
