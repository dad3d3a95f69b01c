"""
Correlators of vertex operators in the marked Brownian loop soup.

Closed forms are the normalized (cutoff-free) correlators. The half-plane
operators are e^(i beta N) rescaled by (2 delta e^(-5 alpha_hat))^(-2 Delta),
where alpha_hat is the weight of loops of diameter > 1 in the half-plane
covering i. In the plane the rescaling carries an extra e^(-pi/sqrt(3)) inside
the bracket. These constants only fix normalizations, so nothing here
evaluates them.

The general n-point skeleton multiplies, over nonempty subsets S of the
insertions, exp[-lam alpha(S|S^c) (1 - phi(sum_S beta))] with weights from a
pluggable provider.
"""

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Protocol, Sequence, Union, runtime_checkable

import numpy as np

from .charfn import (
    DEFAULT_WINDING_TOL,
    MarkDistribution,
    charge_conservation,
    delta_layering,
    second_moment,
)
from .enums import Domain, ErrorCode, ResultFlag
from .exceptions import ContractViolationError, DomainError, SingularityError, ValidationError
from .models import ChargedPoint, CorrelatorResult, MobiusImage
from .special import evaluate_a, f_function

MIN_SEPARATION = 1e-12
MAX_SKELETON_POINTS = 20
MAX_WINDING_CLASSES = 1_000_000
MOBIUS_TOLERANCE = 1e-12
GAMMA_SUM_TOLERANCE = 1e-9
HALFPLANE_SERIES_RADIUS = 0.75


@dataclass
class CorrelatorConfig:
    """Intensity, mark distribution and insertions of one correlator."""

    lam: float
    dist: MarkDistribution
    points: list[ChargedPoint] = field(default_factory=list)
    domain: Domain = Domain.PLANE
    tol: float = DEFAULT_WINDING_TOL

    def __post_init__(self) -> None:
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise ValidationError(
                ErrorCode.INVALID_ARGUMENT.value,
                f"Intensity lambda must be positive, got {self.lam!r}",
            )
        if not isinstance(self.dist, MarkDistribution):
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                f"Expected a MarkDistribution, got {type(self.dist).__name__}",
            )
        if isinstance(self.domain, str):
            try:
                self.domain = Domain(self.domain.replace("-", "_"))
            except ValueError as e:
                raise ValidationError(
                    ErrorCode.INVALID_ARGUMENT.value,
                    f"Unknown domain {self.domain!r}",
                ) from e
        self.points = [_as_point(p) for p in self.points]

    @property
    def betas(self) -> list[float]:
        return [p.beta for p in self.points]

    @property
    def positions(self) -> list[complex]:
        return [p.z for p in self.points]


def _as_point(point) -> ChargedPoint:
    if isinstance(point, ChargedPoint):
        z, beta = complex(point.z), float(point.beta)
    else:
        try:
            z, beta = complex(point[0]), float(point[1])
        except (TypeError, ValueError, IndexError) as e:
            raise ValidationError(
                ErrorCode.INVALID_ARGUMENT.value,
                f"Insertion must be (z, beta), got {point!r}",
            ) from e
    if not (math.isfinite(z.real) and math.isfinite(z.imag) and math.isfinite(beta)):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, f"Insertion ({z}, {beta}) is not finite")
    return ChargedPoint(z=z, beta=beta)


@runtime_checkable
class WeightProvider(Protocol):
    """Loop weights alpha(S|S^c) for subsets of insertion indices."""

    bounded_domain: bool

    def layering_weight(self, subset: tuple[int, ...], n_points: int) -> float: ...


@runtime_checkable
class WindingWeightProvider(Protocol):
    """Loop weights alpha(S|S^c; K) resolved by winding numbers K around S."""

    bounded_domain: bool
    max_winding: int

    def winding_weight(self, subset: tuple[int, ...], windings: tuple[int, ...], n_points: int) -> float: ...


@dataclass
class SubsetWeightTable:
    """Explicit weights, e.g. Monte Carlo estimates; missing subsets weigh 0."""

    weights: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    winding_weights: Mapping[tuple[tuple[int, ...], tuple[int, ...]], float] = field(default_factory=dict)
    bounded_domain: bool = False
    max_winding: int = 0

    def __post_init__(self) -> None:
        self.weights = {tuple(sorted(k)): float(v) for k, v in self.weights.items()}
        normalized = {}
        for (subset, windings), value in self.winding_weights.items():
            order = sorted(range(len(subset)), key=lambda i: subset[i])
            key = (tuple(subset[i] for i in order), tuple(windings[i] for i in order))
            normalized[key] = float(value)
        self.winding_weights = normalized

    def layering_weight(self, subset: tuple[int, ...], n_points: int) -> float:
        return self.weights.get(tuple(sorted(subset)), 0.0)

    def winding_weight(self, subset: tuple[int, ...], windings: tuple[int, ...], n_points: int) -> float:
        return self.winding_weights.get((tuple(subset), tuple(windings)), 0.0)


@dataclass(frozen=True)
class CutoffLayeringWeights:
    """Plane weight (1/5) log(R/delta) of loops with delta <= diam < R covering one point."""

    delta: float
    radius: float
    bounded_domain: bool = False

    def __post_init__(self) -> None:
        _check_cutoffs(self.delta, self.radius)

    def layering_weight(self, subset: tuple[int, ...], n_points: int) -> float:
        if n_points != 1:
            raise DomainError(
                ErrorCode.OUT_OF_DOMAIN.value,
                "Closed-form cutoff weights are known for a single insertion only",
                {"n_points": n_points},
            )
        return math.log(self.radius / self.delta) / 5.0


@dataclass(frozen=True)
class CutoffWindingWeights:
    """Plane weight log(R/delta) / (2 pi^2 k^2) of loops winding k times around one point."""

    delta: float
    radius: float
    max_winding: int = 64
    bounded_domain: bool = False

    def __post_init__(self) -> None:
        _check_cutoffs(self.delta, self.radius)
        if self.max_winding < 1:
            raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "max_winding must be at least 1")

    def winding_weight(self, subset: tuple[int, ...], windings: tuple[int, ...], n_points: int) -> float:
        if n_points != 1:
            raise DomainError(
                ErrorCode.OUT_OF_DOMAIN.value,
                "Closed-form winding weights are known for a single insertion only",
                {"n_points": n_points},
            )
        (k,) = windings
        if k == 0:
            return 0.0
        return math.log(self.radius / self.delta) / (2.0 * math.pi**2 * k * k)


def _check_cutoffs(delta: float, radius: float) -> None:
    if not (0 < delta <= radius and math.isfinite(radius)):
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Cutoffs must satisfy 0 < delta <= R, got delta={delta!r}, R={radius!r}",
        )


def _require_points(cfg: CorrelatorConfig, n: int, name: str) -> list[ChargedPoint]:
    if len(cfg.points) != n:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"{name} needs exactly {n} insertions, got {len(cfg.points)}",
        )
    _check_distinct(cfg.positions)
    return cfg.points


def _check_distinct(positions: Sequence[complex]) -> None:
    for (i, zi), (j, zj) in itertools.combinations(enumerate(positions), 2):
        if abs(zi - zj) <= MIN_SEPARATION:
            raise SingularityError(
                ErrorCode.COINCIDENT_POINTS.value,
                f"Insertions {i} and {j} coincide",
                {"i": i, "j": j, "separation": abs(zi - zj)},
            )


def _require_upper_half_plane(points: Sequence[ChargedPoint]) -> None:
    for i, p in enumerate(points):
        if p.z.imag <= 0:
            raise DomainError(
                ErrorCode.OUT_OF_DOMAIN.value,
                f"Insertion {i} at {p.z} is not in the upper half-plane",
                {"index": i, "z": [p.z.real, p.z.imag]},
            )


def _charge_violation(cfg: CorrelatorConfig) -> Optional[CorrelatorResult]:
    check = charge_conservation(cfg.dist, cfg.betas)
    if check.satisfied:
        return None
    return CorrelatorResult(
        value=0.0,
        flags=[ResultFlag.CHARGE_VIOLATION.value],
        diagnostics={"charge_sum": math.fsum(cfg.betas)},
    )


def _dim(cfg: CorrelatorConfig, beta: float) -> float:
    return delta_layering(cfg.lam, cfg.dist, beta)


def two_point_plane(cfg: CorrelatorConfig) -> CorrelatorResult:
    """|z1 - z2|^(-4 Delta_1), or 0 with a flag when charge is not conserved."""
    p1, p2 = _require_points(cfg, 2, "two_point_plane")
    violated = _charge_violation(cfg)
    if violated:
        return violated
    d1 = _dim(cfg, p1.beta)
    value = math.exp(-4.0 * d1 * math.log(abs(p1.z - p2.z)))
    return CorrelatorResult(value=value, diagnostics={"dims": [d1, _dim(cfg, p2.beta)]})


def three_point_plane(cfg: CorrelatorConfig) -> CorrelatorResult:
    """Product of pairwise powers with unit three-point coefficient."""
    p1, p2, p3 = _require_points(cfg, 3, "three_point_plane")
    violated = _charge_violation(cfg)
    if violated:
        return violated
    d1, d2, d3 = (_dim(cfg, p.beta) for p in (p1, p2, p3))
    log_value = (
        -2.0 * (d1 + d2 - d3) * math.log(abs(p1.z - p2.z))
        - 2.0 * (d1 + d3 - d2) * math.log(abs(p1.z - p3.z))
        - 2.0 * (d2 + d3 - d1) * math.log(abs(p2.z - p3.z))
    )
    return CorrelatorResult(value=math.exp(log_value), diagnostics={"dims": [d1, d2, d3]})


def cross_ratio(z1: complex, z2: complex, z3: complex, z4: complex) -> complex:
    """x = z12 z34 / (z13 z24)."""
    return (z1 - z2) * (z3 - z4) / ((z1 - z3) * (z2 - z4))


def four_point_plane(cfg: CorrelatorConfig) -> CorrelatorResult:
    """
    Plane four-point function of layering vertex operators.

    The cross-ratio dependence enters through exp[-2 A(x) S] with
    S = sum_i Delta_i - sum_{j=2..4} Delta(beta_1 + beta_j).

    Raises:
        SingularityError: for coincident points or a degenerate cross ratio
    """
    points = _require_points(cfg, 4, "four_point_plane")
    violated = _charge_violation(cfg)
    if violated:
        return violated

    z1, z2, z3, z4 = (p.z for p in points)
    b1, b2, b3, b4 = (p.beta for p in points)
    d1, d2, d3, d4 = (_dim(cfg, b) for b in (b1, b2, b3, b4))
    d12, d13, d14 = (_dim(cfg, b1 + b) for b in (b2, b3, b4))
    s = d1 + d2 + d3 + d4 - d12 - d13 - d14

    def log_abs(w: complex) -> float:
        return math.log(abs(w))

    l12, l13, l14 = log_abs(z1 - z2), log_abs(z1 - z3), log_abs(z1 - z4)
    l23, l24, l34 = log_abs(z2 - z3), log_abs(z2 - z4), log_abs(z3 - z4)

    x = cross_ratio(z1, z2, z3, z4)
    a_value, a_info = evaluate_a(x)

    log_value = (
        -2.0 * a_value * s
        - 2.0 * d12 * (l13 + l24 - l12 - l34)
        - 2.0 * d14 * (l13 + l24 - l14 - l23)
        - 2.0 * d1 * (l12 + l14 - l24)
        - 2.0 * d2 * (l12 + l23 - l13)
        - 2.0 * d3 * (l23 + l34 - l24)
        - 2.0 * d4 * (l14 + l34 - l13)
    )
    flags = [ResultFlag.INTEGRAL_REPRESENTATION.value] if a_info["integral_representation"] else []
    return CorrelatorResult(
        value=math.exp(log_value),
        flags=flags,
        diagnostics={
            "x": [x.real, x.imag],
            "A": a_value,
            "S": s,
            "dims": [d1, d2, d3, d4],
            "pair_dims": [d12, d13, d14],
        },
    )


def one_point_halfplane(cfg: CorrelatorConfig) -> CorrelatorResult:
    """(2 Im z)^(-2 Delta) in the upper half-plane."""
    (p1,) = _require_points(cfg, 1, "one_point_halfplane")
    _require_upper_half_plane([p1])
    d1 = _dim(cfg, p1.beta)
    value = math.exp(-2.0 * d1 * math.log(2.0 * p1.z.imag))
    return CorrelatorResult(value=value, diagnostics={"dims": [d1]})


def two_point_halfplane(cfg: CorrelatorConfig) -> CorrelatorResult:
    """
    Half-plane two-point function.

    With K = Delta_1 + Delta_2 - Delta_12 and sigma = |z12|^2 / |z1 - conj z2|^2
    the value is |z12|^(-2K) |z1 - conj z2|^(2K) (2 y1)^(-2 Delta_1)
    (2 y2)^(-2 Delta_2) exp[-K (1 - sigma) 3F2(1,1,4/3;2,5/3;1 - sigma)].
    No charge conservation applies in the half-plane.
    """
    p1, p2 = _require_points(cfg, 2, "two_point_halfplane")
    _require_upper_half_plane([p1, p2])

    d1, d2 = _dim(cfg, p1.beta), _dim(cfg, p2.beta)
    d12 = _dim(cfg, p1.beta + p2.beta)
    k = d1 + d2 - d12

    direct = abs(p1.z - p2.z)
    mirrored = abs(p1.z - p2.z.conjugate())
    # 1 - sigma = 4 y1 y2 / |z1 - conj z2|^2, free of cancellation
    argument = 4.0 * p1.z.imag * p2.z.imag / mirrored**2
    if not argument < 1.0:
        raise SingularityError(
            ErrorCode.COINCIDENT_POINTS.value,
            "Insertions are too close to resolve 1 - sigma below 1",
            {"separation": direct, "mirrored_separation": mirrored},
        )
    sigma = 1.0 - argument

    f_value = f_function(argument).real
    log_value = (
        -2.0 * k * math.log(direct)
        + 2.0 * k * math.log(mirrored)
        - 2.0 * d1 * math.log(2.0 * p1.z.imag)
        - 2.0 * d2 * math.log(2.0 * p2.z.imag)
        - k * f_value
    )
    flags = [ResultFlag.INTEGRAL_REPRESENTATION.value] if argument >= HALFPLANE_SERIES_RADIUS else []
    return CorrelatorResult(
        value=math.exp(log_value),
        flags=flags,
        diagnostics={"sigma": sigma, "dims": [d1, d2], "pair_dim": d12},
    )


def _subsets(n: int):
    for mask in range(1, 1 << n):
        yield tuple(i for i in range(n) if mask >> i & 1)


def _checked_weight(value: float, subset: tuple[int, ...], windings: Optional[tuple[int, ...]] = None) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        details = {"subset": list(subset), "weight": value}
        if windings is not None:
            details["windings"] = list(windings)
        raise ContractViolationError(
            ErrorCode.NEGATIVE_WEIGHT.value,
            f"Weight provider returned an invalid weight {value!r}",
            details,
        )
    return value


def n_point_skeleton(cfg: CorrelatorConfig, weights: WeightProvider) -> CorrelatorResult:
    """
    Product over nonempty subsets S of exp[-lam alpha(S|S^c) (1 - phi(sum_S beta))].

    Raises:
        ValidationError: for more than 20 insertions
        ContractViolationError: if the provider returns a negative weight
    """
    n = len(cfg.points)
    if not 1 <= n <= MAX_SKELETON_POINTS:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Subset enumeration supports 1 to {MAX_SKELETON_POINTS} insertions, got {n}",
        )
    betas = cfg.betas
    exponent = 0.0
    for subset in _subsets(n):
        alpha = _checked_weight(weights.layering_weight(subset, n), subset)
        if alpha == 0.0:
            continue
        charge = math.fsum(betas[i] for i in subset)
        exponent -= cfg.lam * alpha * (1.0 - float(cfg.dist.characteristic(charge)))
    return CorrelatorResult(value=math.exp(exponent), diagnostics={"log_value": exponent})


def winding_n_point_skeleton(cfg: CorrelatorConfig, weights: WindingWeightProvider) -> CorrelatorResult:
    """
    Winding analogue of n_point_skeleton, resolved by winding vectors K.

    Winding numbers are truncated at |k| <= weights.max_winding. More than one
    insertion needs a provider for a bounded domain.
    """
    n = len(cfg.points)
    if not 1 <= n <= MAX_SKELETON_POINTS:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Subset enumeration supports 1 to {MAX_SKELETON_POINTS} insertions, got {n}",
        )
    if n >= 2 and not weights.bounded_domain:
        raise DomainError(
            ErrorCode.OUT_OF_DOMAIN.value,
            "Multi-point winding correlators are only defined on bounded domains",
            {"n_points": n},
        )
    k_max = int(weights.max_winding)
    classes = sum((2 * k_max + 1) ** len(s) for s in _subsets(n))
    if classes > MAX_WINDING_CLASSES:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Too many winding classes to enumerate ({classes})",
            {"classes": classes, "limit": MAX_WINDING_CLASSES},
        )

    betas = cfg.betas
    exponent = 0.0
    for subset in _subsets(n):
        for windings in itertools.product(range(-k_max, k_max + 1), repeat=len(subset)):
            if not any(windings):
                continue
            alpha = _checked_weight(weights.winding_weight(subset, windings, n), subset, windings)
            if alpha == 0.0:
                continue
            charge = math.fsum(k * betas[i] for k, i in zip(windings, subset))
            exponent -= cfg.lam * alpha * (1.0 - float(cfg.dist.characteristic(charge)))
    return CorrelatorResult(value=math.exp(exponent), diagnostics={"log_value": exponent, "max_winding": k_max})


def mobius_image(
    points: Sequence[Union[ChargedPoint, complex]],
    a: complex,
    b: complex,
    c: complex,
    d: complex,
) -> MobiusImage:
    """
    Map insertions by z -> (a z + b) / (c z + d) with ad - bc = 1.

    Returns:
        MobiusImage with the mapped points (charges kept) and |f'(z)| = 1/|cz + d|^2

    Raises:
        ValidationError: if ad - bc differs from 1
        SingularityError: if an insertion sits at the pole
    """
    a, b, c, d = complex(a), complex(b), complex(c), complex(d)
    det = a * d - b * c
    if abs(det - 1.0) > MOBIUS_TOLERANCE:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Moebius map must have ad - bc = 1, got {det}",
        )
    mapped = []
    moduli = []
    for i, point in enumerate(points):
        p = point if isinstance(point, ChargedPoint) else ChargedPoint(z=complex(point), beta=0.0)
        denominator = c * p.z + d
        if abs(denominator) <= MOBIUS_TOLERANCE:
            raise SingularityError(
                ErrorCode.SINGULAR_POINT.value,
                f"Insertion {i} at {p.z} is mapped to infinity",
                {"index": i},
            )
        mapped.append(ChargedPoint(z=(a * p.z + b) / denominator, beta=p.beta))
        moduli.append(1.0 / abs(denominator) ** 2)
    return MobiusImage(points=tuple(mapped), derivative_moduli=tuple(moduli))


def gamma_of(lam: float, dist: MarkDistribution, beta: float) -> float:
    """Free-field charge sqrt(lam E[X^2] / 20) beta."""
    return math.sqrt(lam * second_moment(dist) / 20.0) * beta


def free_field_limit(gammas: Sequence[float], points: Sequence[complex]) -> float:
    """
    Product over pairs of |z_ij|^(4 gamma_i gamma_j), the large-lambda limit.

    Raises:
        ValidationError: if the charges do not sum to zero
    """
    if len(gammas) != len(points):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "One charge per point is required")
    total = math.fsum(gammas)
    if abs(total) > GAMMA_SUM_TOLERANCE:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Free-field charges must sum to zero, got {total!r}",
        )
    positions = [complex(z) for z in points]
    _check_distinct(positions)
    exponent = 0.0
    for (i, zi), (j, zj) in itertools.combinations(enumerate(positions), 2):
        exponent += 4.0 * gammas[i] * gammas[j] * math.log(abs(zi - zj))
    return math.exp(exponent)


def evaluate(cfg: CorrelatorConfig) -> CorrelatorResult:
    """Evaluate the closed form matching the domain and number of insertions."""
    n = len(cfg.points)
    if cfg.domain is Domain.UPPER_HALF_PLANE:
        if n == 1:
            return one_point_halfplane(cfg)
        if n == 2:
            return two_point_halfplane(cfg)
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Half-plane closed forms exist for 1 or 2 insertions, got {n}",
        )

    if n == 1:
        _check_distinct(cfg.positions)
        violated = _charge_violation(cfg)
        return violated or CorrelatorResult(value=1.0, diagnostics={"dims": [0.0]})
    if n == 2:
        return two_point_plane(cfg)
    if n == 3:
        return three_point_plane(cfg)
    if n == 4:
        return four_point_plane(cfg)
    raise ValidationError(
        ErrorCode.INVALID_ARGUMENT.value,
        f"Plane closed forms exist for up to 4 insertions, got {n}",
    )


def lambda_power_property(cfg: CorrelatorConfig) -> tuple[float, float]:
    """Both sides of <...>_lam = <...>_{1/2}^(2 lam), evaluated by the closed forms."""
    at_lambda = evaluate(cfg).value
    at_half = evaluate(replace(cfg, lam=0.5)).value
    return at_lambda, float(np.power(at_half, 2.0 * cfg.lam))
