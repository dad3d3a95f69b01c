"""
Loop Soup - correlators of the Brownian loop soup and Monte Carlo checks.

This package computes layering and winding dimensions, closed-form plane and
half-plane correlators, block-expansion coefficients of the four-point
function, and verifies them against a direct loop soup sampler.
"""

__version__ = "0.1.0"
__author__ = "Loop Soup Team"

from loop_soup.exceptions import (
    LoopSoupError,
    ValidationError,
    DomainError,
    SingularityError,
    AccuracyError,
    DegeneracyError,
    ContractViolationError,
    UnsupportedLabelError,
    MCInconclusiveError,
    ConfigError,
)
from loop_soup.enums import (
    LogLevel,
    MarkKind,
    Domain,
    VertexKind,
    EstimatorKind,
    ResultFlag,
    ErrorCode,
)
from loop_soup.models import (
    ChargedPoint,
    Dimensions,
    ChargeCheck,
    CrossRatio,
    CorrelatorResult,
    BlockLabel,
    CoeffTable,
    LoopPath,
    SoupSample,
    EstimatorResult,
)
from loop_soup.charfn import (
    MarkDistribution,
    Lattice,
    Bernoulli,
    GaussianScalar,
    UnitVector,
    CustomMark,
    phi,
    delta_layering,
    delta_winding,
    dimensions,
    charge_conservation,
    parse_distribution,
)
from loop_soup.special import (
    mu_constant,
    a_function,
    a_function_direct,
    a_function_reference,
    a_series_coefficients,
)
from loop_soup.correlators import (
    CorrelatorConfig,
    evaluate,
    two_point_plane,
    three_point_plane,
    four_point_plane,
    one_point_halfplane,
    two_point_halfplane,
    n_point_skeleton,
    winding_n_point_skeleton,
    mobius_image,
)
from loop_soup.blocks import (
    virasoro_block_series,
    global_block_series,
    expand_g_series,
    extract_coefficients,
    closed_form_C,
)
from loop_soup.soup_mc import (
    LoopSoupSampler,
    sample_duration,
    sample_bridge,
    refine_near,
    sample_soup,
    winding_number,
    encloses_outer,
    estimate_alpha_layering,
    estimate_winding_weight,
    estimate_vertex_onepoint,
    estimate_subset_weights,
    estimate_truncation_shift,
)
from loop_soup.identities import (
    IdentityChecker,
    IdentityReport,
)
from loop_soup.cli import (
    main as cli_main,
    create_parser,
)

__all__ = [
    # Exceptions
    "LoopSoupError",
    "ValidationError",
    "DomainError",
    "SingularityError",
    "AccuracyError",
    "DegeneracyError",
    "ContractViolationError",
    "UnsupportedLabelError",
    "MCInconclusiveError",
    "ConfigError",
    # Enums
    "LogLevel",
    "MarkKind",
    "Domain",
    "VertexKind",
    "EstimatorKind",
    "ResultFlag",
    "ErrorCode",
    # Models
    "ChargedPoint",
    "Dimensions",
    "ChargeCheck",
    "CrossRatio",
    "CorrelatorResult",
    "BlockLabel",
    "CoeffTable",
    "LoopPath",
    "SoupSample",
    "EstimatorResult",
    # Characteristic functions
    "MarkDistribution",
    "Lattice",
    "Bernoulli",
    "GaussianScalar",
    "UnitVector",
    "CustomMark",
    "phi",
    "delta_layering",
    "delta_winding",
    "dimensions",
    "charge_conservation",
    "parse_distribution",
    # Special functions
    "mu_constant",
    "a_function",
    "a_function_direct",
    "a_function_reference",
    "a_series_coefficients",
    # Correlators
    "CorrelatorConfig",
    "evaluate",
    "two_point_plane",
    "three_point_plane",
    "four_point_plane",
    "one_point_halfplane",
    "two_point_halfplane",
    "n_point_skeleton",
    "winding_n_point_skeleton",
    "mobius_image",
    # Blocks
    "virasoro_block_series",
    "global_block_series",
    "expand_g_series",
    "extract_coefficients",
    "closed_form_C",
    # Monte Carlo
    "LoopSoupSampler",
    "sample_duration",
    "sample_bridge",
    "refine_near",
    "sample_soup",
    "winding_number",
    "encloses_outer",
    "estimate_alpha_layering",
    "estimate_winding_weight",
    "estimate_vertex_onepoint",
    "estimate_subset_weights",
    "estimate_truncation_shift",
    # Identities
    "IdentityChecker",
    "IdentityReport",
    # CLI
    "cli_main",
    "create_parser",
]
