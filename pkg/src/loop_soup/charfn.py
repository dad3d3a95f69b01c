"""
Characteristic functions of loop mark distributions.

Every loop of the soup carries an independent random mark X. Exponentials of
the layering and winding counts are conformal primaries whose dimensions
depend on the mark distribution only through phi(beta) = E[exp(i beta X)]:

    Delta(beta)   = lam/10 * (1 - phi(beta))
    Delta_w(beta) = lam/(2 pi^2) * sum_{m>=1} (1 - phi(m beta)) / m^2

Only even, centered distributions are accepted, so phi is real. Vector marks
enter through the scalar |beta| (the unit-vector family is O(d) symmetric).
"""

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate, special

from .enums import ErrorCode, MarkKind
from .exceptions import AccuracyError, DomainError, ValidationError
from .models import ChargeCheck, Dimensions

ArrayLike = Union[float, np.ndarray]

PROBABILITY_TOLERANCE = 1e-12
CHARGE_TOLERANCE = 1e-9
DEFAULT_WINDING_TOL = 1e-10

# 0F1 power series
SERIES_TERM_RATIO = 1e-16
SERIES_MAX_TERMS = 100_000
SERIES_SWITCH = 4.0
UNIT_VECTOR_BETA_LIMIT = 1e8

# winding series truncation
WINDING_START_TERMS = 64
WINDING_MAX_TERMS = 1 << 22
CUSTOM_MAX_TERMS = 1 << 20
QUADRATURE_MAX_SEGMENTS = 10_000


class MarkDistribution(ABC):
    """A mark distribution exposed through its characteristic function."""

    kind: MarkKind

    @abstractmethod
    def characteristic(self, beta: ArrayLike) -> ArrayLike:
        """Evaluate phi elementwise."""

    @property
    def period(self) -> Optional[float]:
        """Real period of phi, None when phi is not periodic."""
        return None

    def envelope(self, y: float) -> float:
        """Upper bound on |phi(u)| for all |u| >= y."""
        return 1.0

    @abstractmethod
    def second_moment(self) -> float:
        """E[X^2] = -phi''(0)."""

    @abstractmethod
    def to_record(self) -> dict:
        """Structured {kind, params} record."""


@dataclass(frozen=True)
class Lattice(MarkDistribution):
    """
    Lattice distribution P(X = b n) = p_n with the origin on the lattice.

    Atoms are (n, p_n) pairs with integer n. The distribution must be even
    and normalized; use Lattice.centered() to shift a distribution whose
    mean sits on a lattice point.
    """

    b: float
    atoms: tuple[tuple[int, float], ...]

    kind = MarkKind.LATTICE

    def __post_init__(self) -> None:
        if not (isinstance(self.b, (int, float)) and math.isfinite(self.b) and self.b > 0):
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                f"Lattice spacing must be positive, got {self.b!r}",
                {"b": self.b},
            )
        object.__setattr__(self, "atoms", _normalize_atoms(self.atoms))

    @classmethod
    def centered(cls, b: float, atoms: Sequence[tuple[int, float]]) -> "Lattice":
        """
        Build a lattice distribution after removing its mean.

        Args:
            b: Lattice spacing
            atoms: (n, p_n) pairs, not necessarily centered

        Returns:
            The re-centered distribution

        Raises:
            ValidationError: if the mean is not a lattice point or the
                centered distribution is not even
        """
        pairs = [(int(n), float(p)) for n, p in atoms]
        mean = sum(n * p for n, p in pairs)
        shift = round(mean)
        if abs(mean - shift) > CHARGE_TOLERANCE:
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                "Mean is not a lattice point; centering would leave the lattice",
                {"mean_index": mean},
            )
        return cls(b=b, atoms=tuple((n - shift, p) for n, p in pairs))

    @property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        ns = np.array([n for n, _ in self.atoms], dtype=float)
        ps = np.array([p for _, p in self.atoms], dtype=float)
        return ns, ps

    def characteristic(self, beta: ArrayLike) -> ArrayLike:
        ns, ps = self._arrays
        return np.cos(np.multiply.outer(beta, self.b * ns)) @ ps

    @property
    def period(self) -> Optional[float]:
        return 2.0 * math.pi / self.b

    def second_moment(self) -> float:
        ns, ps = self._arrays
        return float(np.sum(ps * (self.b * ns) ** 2))

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "b": self.b,
            "atoms": [[n, p] for n, p in self.atoms],
        }


class Bernoulli(Lattice):
    """Marks +1 and -1 with probability 1/2 each; phi(beta) = cos(beta)."""

    kind = MarkKind.BERNOULLI

    def __init__(self) -> None:
        super().__init__(b=1.0, atoms=((-1, 0.5), (1, 0.5)))

    def characteristic(self, beta: ArrayLike) -> ArrayLike:
        return np.cos(beta)

    def second_moment(self) -> float:
        return 1.0

    def to_record(self) -> dict:
        return {"kind": self.kind.value}


@dataclass(frozen=True)
class GaussianScalar(MarkDistribution):
    """Centered normal marks; phi(beta) = exp(-sigma^2 beta^2 / 2)."""

    sigma: float

    kind = MarkKind.GAUSSIAN

    def __post_init__(self) -> None:
        if not (isinstance(self.sigma, (int, float)) and math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                f"Gaussian standard deviation must be positive, got {self.sigma!r}",
                {"sigma": self.sigma},
            )

    def characteristic(self, beta: ArrayLike) -> ArrayLike:
        return np.exp(-0.5 * self.sigma**2 * np.square(beta))

    def envelope(self, y: float) -> float:
        return math.exp(-0.5 * self.sigma**2 * y * y)

    def second_moment(self) -> float:
        return self.sigma**2

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "sigma": self.sigma}


@dataclass(frozen=True)
class UnitVector(MarkDistribution):
    """
    Uniformly oriented unit vectors in R^d.

    Charges are vectors as well; by O(d) symmetry phi depends only on the
    scalar beta = |beta_vector|, which is what every function here takes.
    """

    d: int

    kind = MarkKind.UNIT_VECTOR

    def __post_init__(self) -> None:
        if isinstance(self.d, bool) or not isinstance(self.d, int) or self.d < 1:
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                f"Dimension must be an integer >= 1, got {self.d!r}",
                {"d": self.d},
            )

    def characteristic(self, beta: ArrayLike) -> ArrayLike:
        if np.ndim(beta) == 0:
            return phi_unit_vector(self.d, float(beta))
        flat = [phi_unit_vector(self.d, float(b)) for b in np.ravel(beta)]
        return np.array(flat).reshape(np.shape(beta))

    @property
    def period(self) -> Optional[float]:
        # d = 1 is the +-1 lattice
        return 2.0 * math.pi if self.d == 1 else None

    def second_moment(self) -> float:
        return 1.0 / self.d

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "d": self.d}


@dataclass(frozen=True)
class CharacteristicCheck:
    """Result of grid validation of a characteristic function."""

    valid: bool
    errors: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class CustomMark(MarkDistribution):
    """
    User-supplied characteristic function.

    The evaluator is validated on a grid at construction. An optional
    envelope tightens the winding tail bound and an optional sampler lets
    the Monte Carlo module draw marks.
    """

    evaluator: Callable[[float], float]
    name: str = "custom"
    moment2: Optional[float] = None
    envelope_fn: Optional[Callable[[float], float]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    kind = MarkKind.CUSTOM

    def __post_init__(self) -> None:
        check = validate_characteristic(self.evaluator)
        if not check.valid:
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                f"Evaluator '{self.name}' is not an even characteristic function",
                {"errors": check.errors},
            )

    def characteristic(self, beta: ArrayLike) -> ArrayLike:
        if np.ndim(beta) == 0:
            return float(np.real(self.evaluator(float(beta))))
        flat = [float(np.real(self.evaluator(float(b)))) for b in np.ravel(beta)]
        return np.array(flat).reshape(np.shape(beta))

    def envelope(self, y: float) -> float:
        if self.envelope_fn is None:
            return 1.0
        return min(1.0, float(self.envelope_fn(y)))

    def second_moment(self) -> float:
        if self.moment2 is not None:
            return float(self.moment2)
        h = 1e-4
        return (2.0 - 2.0 * self.characteristic(h)) / (h * h)

    def to_record(self) -> dict:
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Custom distribution '{self.name}' has no text record",
        )


def _normalize_atoms(atoms) -> tuple[tuple[int, float], ...]:
    merged: dict[int, float] = {}
    try:
        for n, p in atoms:
            if isinstance(n, float) and not n.is_integer():
                raise ValidationError(
                    ErrorCode.INVALID_DISTRIBUTION.value,
                    f"Lattice atom index must be an integer, got {n!r}",
                )
            p = float(p)
            if not math.isfinite(p) or p < 0:
                raise ValidationError(
                    ErrorCode.INVALID_DISTRIBUTION.value,
                    f"Lattice probabilities must be nonnegative, got {p!r}",
                )
            merged[int(n)] = merged.get(int(n), 0.0) + p
    except (TypeError, ValueError) as e:
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Malformed lattice atoms: {e}",
        ) from e

    if not merged:
        raise ValidationError(ErrorCode.INVALID_DISTRIBUTION.value, "Lattice needs at least one atom")

    total = math.fsum(merged.values())
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Lattice probabilities sum to {total!r}, not 1",
            {"total": total},
        )

    for n, p in merged.items():
        if abs(p - merged.get(-n, 0.0)) > PROBABILITY_TOLERANCE:
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                "Lattice distribution is not even (p_n != p_-n)",
                {"n": n, "p_n": p, "p_minus_n": merged.get(-n, 0.0)},
            )

    return tuple(sorted((n, p) for n, p in merged.items() if p > 0))


def validate_characteristic(
    evaluator: Callable[[float], float],
    grid: Optional[Sequence[float]] = None,
    tolerance: float = 1e-12,
) -> CharacteristicCheck:
    """
    Check normalization, boundedness, evenness and reality of phi on a grid.

    Args:
        evaluator: Candidate characteristic function
        grid: Charges to probe (defaults to 401 points on [-20, 20])
        tolerance: Allowed violation

    Returns:
        CharacteristicCheck listing every violated property
    """
    if grid is None:
        grid = np.linspace(-20.0, 20.0, 401)
    errors: list[str] = []

    try:
        at_zero = complex(evaluator(0.0))
    except Exception as e:  # evaluator is user code
        return CharacteristicCheck(False, [f"evaluator failed at 0: {e}"])
    if abs(at_zero - 1.0) > tolerance:
        errors.append(f"phi(0) = {at_zero} != 1")

    for beta in grid:
        beta = float(beta)
        try:
            value = complex(evaluator(beta))
            mirrored = complex(evaluator(-beta))
        except Exception as e:
            errors.append(f"evaluator failed at {beta}: {e}")
            break
        if abs(value.imag) > tolerance:
            errors.append(f"phi({beta}) has imaginary part {value.imag}")
        if abs(value) > 1.0 + tolerance:
            errors.append(f"|phi({beta})| = {abs(value)} > 1")
        if abs(value - mirrored) > tolerance:
            errors.append(f"phi({beta}) != phi({-beta})")
        if len(errors) >= 10:
            break

    return CharacteristicCheck(valid=not errors, errors=errors)


def _require_distribution(dist) -> MarkDistribution:
    if not isinstance(dist, MarkDistribution):
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Expected a validated MarkDistribution, got {type(dist).__name__}",
        )
    return dist


def _require_lambda(lam: float) -> None:
    if not (isinstance(lam, (int, float)) and math.isfinite(lam) and lam > 0):
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Intensity lambda must be positive, got {lam!r}",
            {"lambda": lam},
        )


def phi(dist: MarkDistribution, beta: float) -> float:
    """
    Characteristic function E[cos(beta X)] of a validated distribution.

    Args:
        dist: Mark distribution
        beta: Real charge

    Returns:
        phi(beta) in [-1, 1]
    """
    return float(_require_distribution(dist).characteristic(float(beta)))


def phi_unit_vector(d: int, beta: float) -> float:
    """
    0F1(; d/2; -beta^2/4), the characteristic function of a uniform unit vector.

    Small arguments use the power series, stopped when the next term drops
    below 1e-16 of the running sum. Large arguments go through the Bessel
    form Gamma(d/2) (2/beta)^(d/2-1) J_(d/2-1)(beta), where the alternating
    series would cancel catastrophically.
    """
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Dimension must be an integer >= 1, got {d!r}",
        )
    b = abs(float(beta))
    if b == 0.0:
        return 1.0
    if b > UNIT_VECTOR_BETA_LIMIT:
        raise AccuracyError(
            ErrorCode.ACCURACY_NOT_REACHED.value,
            f"|beta| = {b} exceeds the supported range of 0F1",
            {"beta": b, "limit": UNIT_VECTOR_BETA_LIMIT},
        )

    a = 0.5 * d
    if b <= SERIES_SWITCH or b * b / 4.0 <= 2.0 * a:
        return _hyp0f1_series(a, -b * b / 4.0)

    nu = a - 1.0
    log_prefactor = special.gammaln(a) + nu * math.log(2.0 / b)
    return float(math.exp(log_prefactor) * special.jv(nu, b))


def _hyp0f1_series(a: float, z: float) -> float:
    term = 1.0
    total = 1.0
    for k in range(SERIES_MAX_TERMS):
        term *= z / ((a + k) * (k + 1))
        total += term
        if abs(term) < SERIES_TERM_RATIO * abs(total):
            return total
    raise AccuracyError(
        ErrorCode.ACCURACY_NOT_REACHED.value,
        "0F1 series did not converge",
        {"a": a, "z": z, "terms": SERIES_MAX_TERMS},
    )


def delta_layering(lam: float, dist: MarkDistribution, beta: float) -> float:
    """Layering dimension lam/10 * (1 - phi(beta)), in [0, lam/5]."""
    _require_lambda(lam)
    return lam / 10.0 * (1.0 - phi(dist, beta))


def _periodic_winding_sum(theta: np.ndarray) -> np.ndarray:
    # sum_{m>=1} (1 - cos(m theta)) / m^2 = pi theta/2 - theta^2/4 on [0, 2 pi]
    theta = np.mod(theta, 2.0 * math.pi)
    return math.pi * theta / 2.0 - theta * theta / 4.0


def delta_winding(
    lam: float,
    dist: MarkDistribution,
    beta: float,
    tol: float = DEFAULT_WINDING_TOL,
) -> float:
    """
    Winding dimension lam/(2 pi^2) * sum_m (1 - phi(m beta)) / m^2.

    Lattice marks use the exact per-atom closed form. Unit vectors with
    d >= 2 integrate that closed form against the projection density.
    Everything else sums the series until the tail bound
    envelope((M+1) beta) * psi'(M+1) falls under tol.

    Args:
        lam: Intensity
        dist: Mark distribution
        beta: Real charge
        tol: Absolute accuracy of the returned dimension

    Returns:
        Delta_w(beta) >= 0

    Raises:
        AccuracyError: if tol cannot be reached; details carry the bound
    """
    _require_lambda(lam)
    dist = _require_distribution(dist)
    if not (math.isfinite(tol) and tol > 0):
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Tolerance must be positive, got {tol!r}",
        )
    beta = abs(float(beta))
    if beta == 0.0:
        return 0.0

    scale = lam / (2.0 * math.pi**2)
    series_tol = tol / scale

    if isinstance(dist, Lattice):
        ns, ps = dist._arrays
        return scale * float(np.sum(ps * _periodic_winding_sum(beta * dist.b * ns)))

    if isinstance(dist, UnitVector):
        if dist.d == 1:
            return scale * float(_periodic_winding_sum(np.array(beta)))
        return scale * _unit_vector_winding_sum(dist.d, beta, series_tol)

    return scale * _winding_series(dist, beta, series_tol)


def _winding_series(dist: MarkDistribution, beta: float, series_tol: float) -> float:
    cap = CUSTOM_MAX_TERMS if isinstance(dist, CustomMark) else WINDING_MAX_TERMS
    terms = WINDING_START_TERMS
    while True:
        m = np.arange(1, terms + 1, dtype=float)
        values = (1.0 - np.asarray(dist.characteristic(m * beta), dtype=float)) / (m * m)
        partial = float(np.sum(values[::-1]))
        tail = float(special.polygamma(1, terms + 1))
        bound = dist.envelope((terms + 1) * beta) * tail
        if bound <= series_tol / 2.0:
            return partial + tail
        if terms >= cap:
            raise AccuracyError(
                ErrorCode.ACCURACY_NOT_REACHED.value,
                "Winding series tail bound did not reach the requested tolerance",
                {
                    "achieved_bound": bound,
                    "requested": series_tol,
                    "terms": terms,
                },
            )
        terms *= 2


def _unit_vector_winding_sum(d: int, beta: float, series_tol: float) -> float:
    # X = cos(theta) with density proportional to sin^(d-2)(theta); the
    # integrand is even under theta -> pi - theta.
    weight_norm = math.sqrt(math.pi) * math.exp(special.gammaln((d - 1) / 2.0) - special.gammaln(d / 2.0))
    n_breaks = int(beta // (2.0 * math.pi))
    if n_breaks > QUADRATURE_MAX_SEGMENTS:
        raise AccuracyError(
            ErrorCode.ACCURACY_NOT_REACHED.value,
            "Too many periods for the quadrature of the winding sum",
            {"beta": beta, "segments": n_breaks},
        )

    def integrand(theta: float) -> float:
        return float(_periodic_winding_sum(np.array(beta * math.cos(theta)))) * math.sin(theta) ** (d - 2)

    edges = [math.acos(2.0 * math.pi * j / beta) for j in range(n_breaks, 0, -1)]
    edges = [0.0] + edges + [math.pi / 2.0]
    edges = sorted(set(edges))
    eps = series_tol * weight_norm / (8.0 * len(edges))

    total = 0.0
    error = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        value, err = integrate.quad(integrand, lo, hi, epsabs=eps, epsrel=0.0, limit=200)
        total += value
        error += err

    result = 2.0 * total / weight_norm
    achieved = 2.0 * error / weight_norm
    if achieved > series_tol:
        raise AccuracyError(
            ErrorCode.ACCURACY_NOT_REACHED.value,
            "Quadrature of the winding sum did not reach the requested tolerance",
            {"achieved_bound": achieved, "requested": series_tol},
        )
    return result


def lattice_period(dist: MarkDistribution) -> Optional[float]:
    """Real period 2 pi / b of phi for lattice marks, None otherwise."""
    return _require_distribution(dist).period


def charge_conservation(dist: MarkDistribution, betas: Sequence[float]) -> ChargeCheck:
    """
    Test sum(beta) in (2 pi / b) Z for lattice marks, sum(beta) = 0 otherwise.

    Returns:
        ChargeCheck with the integer k when satisfied
    """
    total = math.fsum(float(b) for b in betas)
    period = lattice_period(dist)
    if period is None:
        if abs(total) <= CHARGE_TOLERANCE:
            return ChargeCheck(satisfied=True, k=0)
        return ChargeCheck(satisfied=False, k=None)

    k = round(total / period)
    if abs(total - k * period) <= CHARGE_TOLERANCE:
        return ChargeCheck(satisfied=True, k=int(k))
    return ChargeCheck(satisfied=False, k=None)


def second_moment(dist: MarkDistribution) -> float:
    """E[X^2] = -phi''(0) of the mark distribution."""
    return float(_require_distribution(dist).second_moment())


def dimensions(
    lam: float,
    dist: MarkDistribution,
    beta: float,
    tol: float = DEFAULT_WINDING_TOL,
) -> Dimensions:
    """Bundle the layering and winding dimensions of one charge."""
    return Dimensions(
        delta=delta_layering(lam, dist, beta),
        delta_w=delta_winding(lam, dist, beta, tol),
        lam=float(lam),
    )


def distribution_from_record(record: dict) -> MarkDistribution:
    """
    Build a distribution from its {kind, params} record.

    Raises:
        ValidationError: on unknown kinds or invalid parameters
    """
    if not isinstance(record, dict) or "kind" not in record:
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Distribution record needs a 'kind' field, got {record!r}",
        )
    kind = str(record["kind"]).replace("-", "_").lower()
    try:
        if kind == MarkKind.BERNOULLI.value:
            return Bernoulli()
        if kind == MarkKind.LATTICE.value:
            atoms = tuple((int(n), float(p)) for n, p in record["atoms"])
            return Lattice(b=float(record.get("b", 1.0)), atoms=atoms)
        if kind == MarkKind.GAUSSIAN.value:
            return GaussianScalar(sigma=float(record.get("sigma", 1.0)))
        if kind == MarkKind.UNIT_VECTOR.value:
            return UnitVector(d=int(record["d"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Malformed {kind} record: {e}",
            {"record": record},
        ) from e
    raise ValidationError(
        ErrorCode.INVALID_DISTRIBUTION.value,
        f"Unknown distribution kind: {record['kind']!r}",
    )


def distribution_to_record(dist: MarkDistribution) -> dict:
    return _require_distribution(dist).to_record()


def parse_distribution(text: str) -> MarkDistribution:
    """
    Parse the command-line form of a distribution.

    Accepts inline JSON records and the shorthands 'bernoulli',
    'gaussian:SIGMA' and 'unit-vector:D'.
    """
    text = text.strip()
    if text.startswith("{"):
        try:
            return distribution_from_record(json.loads(text))
        except json.JSONDecodeError as e:
            raise ValidationError(
                ErrorCode.INVALID_DISTRIBUTION.value,
                f"Invalid distribution JSON: {e}",
            ) from e

    name, _, arg = text.partition(":")
    name = name.replace("-", "_").lower()
    try:
        if name == "bernoulli" and not arg:
            return Bernoulli()
        if name == "gaussian":
            return GaussianScalar(sigma=float(arg) if arg else 1.0)
        if name == "unit_vector" and arg:
            return UnitVector(d=int(arg))
    except ValueError as e:
        raise ValidationError(
            ErrorCode.INVALID_DISTRIBUTION.value,
            f"Invalid distribution parameter in {text!r}: {e}",
        ) from e
    raise ValidationError(
        ErrorCode.INVALID_DISTRIBUTION.value,
        f"Unrecognized distribution {text!r}; use bernoulli, gaussian:SIGMA, unit-vector:D or a JSON record",
    )


def distribution_label(dist: MarkDistribution) -> str:
    """Short human-readable label used in tables."""
    if isinstance(dist, Bernoulli):
        return "bernoulli"
    if isinstance(dist, Lattice):
        return f"lattice(b={dist.b:g})"
    if isinstance(dist, GaussianScalar):
        return f"gaussian(sigma={dist.sigma:g})"
    if isinstance(dist, UnitVector):
        return f"unit-vector(d={dist.d})"
    if isinstance(dist, CustomMark):
        return dist.name
    raise DomainError(ErrorCode.INVALID_DISTRIBUTION.value, f"Unknown distribution {dist!r}")
