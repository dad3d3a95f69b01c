"""
Special functions entering the four-point function of layering vertices.

The cross-ratio dependence of the plane four-point function is carried by

    A(x) = 1/2 Re f(x) - 6 mu |x (1 - x)|^(2/3) |F(x)|^2

with f(x) = x 3F2(1, 1, 4/3; 2, 5/3; x), F(x) = 2F1(2/3, 1; 4/3; x) and

    mu = 2^(1/3) pi^2 / (3 sqrt(3) Gamma(1/6)^2 Gamma(4/3)^2) ~ 0.0969.

A is single-valued and real. Under the crossing group it obeys
A(x) = A(1 - x) and A(x) = A(1/x) - log|x|, which is how a_function brings any
x into the region where the series or the Euler integrals converge fast.
a_function_direct never uses those relations so it can be used to test them.
"""

import cmath
import math
from fractions import Fraction
from typing import Callable, Optional, Union

import mpmath
import numpy as np
from scipy import integrate

from .enums import ErrorCode
from .exceptions import AccuracyError, DomainError, SingularityError, ValidationError
from .models import CrossRatio

Number = Union[float, complex]

SERIES_EPS = 1e-17
SERIES_MAX_TERMS = 100_000
SERIES_RADIUS = 0.75  # beyond this the Euler integrals are used
QUAD_EPSABS = 1e-15
QUAD_EPSREL = 1e-13
QUAD_LIMIT = 200
REFERENCE_DPS = 50

# Lanczos approximation with g = 6.0246800407767295 and 13 terms
# (num/denom in decreasing powers, exp(-g) scaled)
LANCZOS_G = 6.024680040776729583740234375
LANCZOS_NUM = np.array([
    0.006061842346248906525783753964555936883222,
    0.5098416655656676188125178644804694509993,
    19.51992788247617482847860966235652136208,
    449.9445569063168119446858607650988409623,
    6955.999602515376140356310115515198987526,
    75999.29304014542649875303443598909137092,
    601859.6171681098786670226533699352302507,
    3481712.15498064590882071018964774556468,
    14605578.08768506808414169982791359218571,
    43338889.32467613834773723740590533316085,
    86363131.28813859145546927288977868422342,
    103794043.1163445451906271053616070238554,
    56906521.91347156388090791033559122686859,
])
LANCZOS_DENOM = np.array([
    1.0, 66.0, 1925.0, 32670.0, 357423.0, 2637558.0, 13339535.0,
    45995730.0, 105258076.0, 150917976.0, 120543840.0, 39916800.0, 0.0,
])
GAMMA_MAX_ARGUMENT = 171.0


def gamma_positive(x: float) -> float:
    """
    Gamma function on the positive reals.

    Args:
        x: Argument, 0 < x <= 171

    Returns:
        Gamma(x) to about 1e-15 relative accuracy

    Raises:
        DomainError: for x <= 0 or arguments that overflow
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(
            ErrorCode.OUT_OF_DOMAIN.value,
            f"Gamma is only provided for positive arguments, got {x!r}",
        )
    if x > GAMMA_MAX_ARGUMENT:
        raise DomainError(
            ErrorCode.OUT_OF_DOMAIN.value,
            f"Gamma({x}) overflows double precision",
        )
    if x < 0.5:
        return gamma_positive(x + 1.0) / x
    zgh = x + LANCZOS_G - 0.5
    return _lanczos_sum_expg_scaled(x) * (zgh / math.e) ** (x - 0.5)


def _lanczos_sum_expg_scaled(x: float) -> float:
    if x <= 1.0:
        return float(np.polyval(LANCZOS_NUM, x) / np.polyval(LANCZOS_DENOM, x))
    inv = 1.0 / x
    return float(np.polyval(LANCZOS_NUM[::-1], inv) / np.polyval(LANCZOS_DENOM[::-1], inv))


def mu_constant() -> float:
    """The constant mu fixed by single-valuedness of A."""
    return (
        2.0 ** (1.0 / 3.0)
        * math.pi**2
        / (3.0 * math.sqrt(3.0) * gamma_positive(1.0 / 6.0) ** 2 * gamma_positive(4.0 / 3.0) ** 2)
    )


def mu_reference(dps: int = REFERENCE_DPS) -> float:
    """mu evaluated in extended precision with mpmath."""
    with mpmath.workdps(dps):
        value = (
            mpmath.cbrt(2)
            * mpmath.pi**2
            / (3 * mpmath.sqrt(3) * mpmath.gamma(mpmath.mpf(1) / 6) ** 2 * mpmath.gamma(mpmath.mpf(4) / 3) ** 2)
        )
        return float(value)


def _hypergeometric_series(ratio: Callable[[int], float], x: Number, name: str) -> Number:
    is_complex = isinstance(x, complex) or np.iscomplexobj(x)
    z = complex(x)
    if not (cmath.isfinite(z) and abs(z) < 1.0):
        raise DomainError(
            ErrorCode.OUT_OF_DOMAIN.value,
            f"{name} series requires |x| < 1, got {x!r}",
            {"x": [z.real, z.imag]},
        )

    modulus = abs(z)
    term = 1.0 + 0.0j
    running = term
    re_terms = [1.0]
    im_terms = [0.0]
    for n in range(SERIES_MAX_TERMS):
        term *= ratio(n) * z
        running += term
        re_terms.append(term.real)
        im_terms.append(term.imag)
        # ratios are below 1, so the tail is bounded by a geometric series
        if abs(term) <= SERIES_EPS * abs(running) * (1.0 - modulus):
            total = complex(math.fsum(re_terms), math.fsum(im_terms))
            return total if is_complex else total.real

    raise AccuracyError(
        ErrorCode.ACCURACY_NOT_REACHED.value,
        f"{name} series did not converge in {SERIES_MAX_TERMS} terms",
        {"x": [z.real, z.imag]},
    )


def hyp2f1_23_1_43(x: Number) -> Number:
    """2F1(2/3, 1; 4/3; x) by its power series, |x| < 1."""
    return _hypergeometric_series(lambda n: (n + 2.0 / 3.0) / (n + 4.0 / 3.0), x, "2F1(2/3,1;4/3)")


def hyp3f2_11_43_2_53(x: Number) -> Number:
    """3F2(1, 1, 4/3; 2, 5/3; x) by its power series, |x| < 1."""
    return _hypergeometric_series(
        lambda n: (n + 1.0) * (n + 4.0 / 3.0) / ((n + 2.0) * (n + 5.0 / 3.0)),
        x,
        "3F2(1,1,4/3;2,5/3)",
    )


def _quad_alg(func: Callable[[float], float], alpha: float) -> float:
    value, error = integrate.quad(
        func,
        0.0,
        1.0,
        weight="alg",
        wvar=(alpha, alpha),
        epsabs=QUAD_EPSABS,
        epsrel=QUAD_EPSREL,
        limit=QUAD_LIMIT,
    )
    if error > 1e-10 * max(1.0, abs(value)):
        raise AccuracyError(
            ErrorCode.ACCURACY_NOT_REACHED.value,
            "Euler integral did not converge",
            {"estimate": value, "error": error},
        )
    return value


def _f_integral(x: complex) -> complex:
    # x 3F2(1,1,4/3;2,5/3;x) = -1/B(4/3,1/3) int s^(-2/3) (1-s)^(-2/3) log(1 - s x) ds
    beta_norm = gamma_positive(4.0 / 3.0) * gamma_positive(1.0 / 3.0) / gamma_positive(5.0 / 3.0)
    real = _quad_alg(lambda s: math.log(abs(1.0 - s * x)), -2.0 / 3.0)
    imag = 0.0
    if x.imag != 0.0:
        imag = _quad_alg(lambda s: cmath.phase(1.0 - s * x), -2.0 / 3.0)
    return -complex(real, imag) / beta_norm


def _hyp2f1_integral(x: complex) -> complex:
    # 2F1(2/3,1;4/3;x) = Gamma(4/3)/Gamma(2/3)^2 int s^(-1/3) (1-s)^(-1/3) / (1 - s x) ds
    prefactor = gamma_positive(4.0 / 3.0) / gamma_positive(2.0 / 3.0) ** 2

    def real_part(s: float) -> float:
        w = 1.0 - s * x
        return w.real / (w.real**2 + w.imag**2)

    def imag_part(s: float) -> float:
        w = 1.0 - s * x
        return -w.imag / (w.real**2 + w.imag**2)

    real = _quad_alg(real_part, -1.0 / 3.0)
    imag = _quad_alg(imag_part, -1.0 / 3.0) if x.imag != 0.0 else 0.0
    return prefactor * complex(real, imag)


def _check_cut(x: complex, name: str) -> None:
    if not cmath.isfinite(x):
        raise SingularityError(ErrorCode.SINGULAR_POINT.value, f"{name} needs a finite argument")
    if x.imag == 0.0 and x.real >= 1.0:
        raise DomainError(
            ErrorCode.OUT_OF_DOMAIN.value,
            f"{name} is evaluated on the cut plane; x = {x.real} lies on [1, inf)",
        )


def f_function(x: Number) -> complex:
    """
    x 3F2(1, 1, 4/3; 2, 5/3; x) on the plane cut along [1, inf).

    Uses the power series for |x| < 0.75 and the Euler integral otherwise.
    """
    z = complex(x)
    _check_cut(z, "f")
    if abs(z) < SERIES_RADIUS:
        return z * complex(hyp3f2_11_43_2_53(z))
    return _f_integral(z)


def hyp2f1_function(x: Number) -> complex:
    """2F1(2/3, 1; 4/3; x) on the plane cut along [1, inf)."""
    z = complex(x)
    _check_cut(z, "2F1")
    if abs(z) < SERIES_RADIUS:
        return complex(hyp2f1_23_1_43(z))
    return _hyp2f1_integral(z)


def _resolve_mu(mu: Optional[float]) -> float:
    return mu_constant() if mu is None else float(mu)


def _check_cross_ratio(x: Number) -> complex:
    z = complex(x)
    if CrossRatio(z).is_degenerate:
        raise SingularityError(
            ErrorCode.SINGULAR_POINT.value,
            f"A(x) is singular at x = {x!r}",
            {"x": [z.real, z.imag] if cmath.isfinite(z) else str(z)},
        )
    return z


def _a_from_parts(y: complex, f_value: complex, f2_value: complex, mu: float) -> float:
    modulus = abs(y * (1.0 - y)) ** (2.0 / 3.0)
    return 0.5 * f_value.real - 6.0 * mu * modulus * abs(f2_value) ** 2


# (image, shift) pairs: A(x) = A(y) + shift(y)
_CROSSING_IMAGES: tuple[tuple[str, Callable[[complex], complex], Callable[[complex], float]], ...] = (
    ("identity", lambda x: x, lambda y: 0.0),
    ("one_minus", lambda x: 1.0 - x, lambda y: 0.0),
    ("inverse", lambda x: 1.0 / x, lambda y: math.log(abs(y))),
    ("inverse_one_minus", lambda x: 1.0 / (1.0 - x), lambda y: math.log(abs(y))),
    ("x_over_x_minus_one", lambda x: x / (x - 1.0), lambda y: math.log(abs(y - 1.0))),
    ("one_minus_inverse", lambda x: (x - 1.0) / x, lambda y: math.log(abs(1.0 - y))),
)


def evaluate_a(x: Number, mu: Optional[float] = None) -> tuple[float, dict]:
    """
    A(x) together with evaluation diagnostics.

    Returns:
        (A(x), diagnostics) where diagnostics name the crossing image used
        and whether the Euler integrals were needed
    """
    z = _check_cross_ratio(x)
    mu_value = _resolve_mu(mu)

    best = None
    for name, image, shift in _CROSSING_IMAGES:
        y = image(z)
        if best is None or abs(y) < abs(best[1]):
            best = (name, y, shift)
    name, y, shift = best

    integral = abs(y) >= SERIES_RADIUS
    value = _a_from_parts(y, f_function(y), hyp2f1_function(y), mu_value) + shift(y)
    return value, {"image": name, "y": [y.real, y.imag], "integral_representation": integral}


def a_function(x: Number, mu: Optional[float] = None) -> float:
    """
    A(x) for any cross ratio away from 0, 1 and infinity.

    Args:
        x: Cross ratio
        mu: Override of the constant mu (used to demonstrate that crossing
            symmetry fixes it)

    Raises:
        SingularityError: for x within 1e-13 of 0 or 1, or non-finite x
    """
    return evaluate_a(x, mu)[0]


def a_function_direct(x: Number, mu: Optional[float] = None) -> float:
    """
    A(x) from the Euler integrals alone, without crossing relations.

    Valid on the plane cut along [1, inf). Serves as the independent side
    of crossing symmetry checks.
    """
    z = _check_cross_ratio(x)
    _check_cut(z, "A")
    return _a_from_parts(z, _f_integral(z), _hyp2f1_integral(z), _resolve_mu(mu))


def a_function_reference(x: Number, mu: Optional[float] = None, dps: int = REFERENCE_DPS) -> float:
    """A(x) from mpmath hypergeometric functions in extended precision."""
    z = _check_cross_ratio(x)
    mu_value = mu_reference(dps) if mu is None else float(mu)
    with mpmath.workdps(dps):
        w = mpmath.mpc(z.real, z.imag)
        third = mpmath.mpf(1) / 3
        f_value = w * mpmath.hyp3f2(1, 1, 4 * third, 2, 5 * third, w)
        f2_value = mpmath.hyp2f1(2 * third, 1, 4 * third, w)
        modulus = abs(w * (1 - w)) ** (2 * third)
        value = mpmath.re(f_value) / 2 - 6 * mu_value * modulus * abs(f2_value) ** 2
        return float(value)


def hyp3f2_coefficients(n_terms: int) -> list[Fraction]:
    """Exact coefficients a_n = (4/3)_n / ((5/3)_n (n + 1)) of 3F2(1,1,4/3;2,5/3;x)."""
    coefficients = []
    pochhammer_ratio = Fraction(1)
    for n in range(n_terms):
        coefficients.append(pochhammer_ratio / (n + 1))
        pochhammer_ratio *= Fraction(3 * n + 4, 3 * n + 5)
    return coefficients


def hyp2f1_third_coefficients(n_terms: int) -> list[Fraction]:
    """Exact coefficients of 2F1(1/3, 2/3; 4/3; x) = (1 - x)^(1/3) F(x)."""
    coefficients = []
    term = Fraction(1)
    for n in range(n_terms):
        coefficients.append(term)
        term *= Fraction((3 * n + 1) * (3 * n + 2), (3 * n + 4) * 3 * (n + 1))
    return coefficients


MAX_SERIES_ORDER = 12


def a_series_coefficients(order: int, root_order: int = 3, mu: Optional[float] = None) -> np.ndarray:
    """
    Double power series of A in u = x^(1/3), u_bar = conj(x)^(1/3).

    A(x) = 1/4 sum_n a_n (x^(n+1) + conj(x)^(n+1)) - 6 mu u u_bar Q(x) Q(conj x)
    with Q(x) = 2F1(1/3, 2/3; 4/3; x) = (1 - x)^(1/3) F(x).

    Args:
        order: Highest integer power of x kept
        root_order: Denominator of the fractional exponents (only 3 occurs)
        mu: Override of the constant mu

    Returns:
        Array c with A ~ sum c[i, j] u^i u_bar^j, indices up to 3 * order
    """
    if root_order != 3:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"A expands in powers of x^(1/3); root_order {root_order} is not supported",
        )
    if not isinstance(order, int) or order < 1 or order > MAX_SERIES_ORDER:
        raise ValidationError(
            ErrorCode.ORDER_TOO_LARGE.value,
            f"Series order must be between 1 and {MAX_SERIES_ORDER}, got {order!r}",
            {"order": order, "max_order": MAX_SERIES_ORDER},
        )
    mu_value = _resolve_mu(mu)
    size = root_order * order + 1
    table = np.zeros((size, size))

    for n, a_n in enumerate(hyp3f2_coefficients(order)):
        table[3 * (n + 1), 0] += float(a_n) / 4.0
        table[0, 3 * (n + 1)] += float(a_n) / 4.0

    q = [float(c) for c in hyp2f1_third_coefficients(order + 1)]
    for i, q_i in enumerate(q):
        for j, q_j in enumerate(q):
            if 1 + 3 * i < size and 1 + 3 * j < size:
                table[1 + 3 * i, 1 + 3 * j] -= 6.0 * mu_value * q_i * q_j
    return table


def series_value(table: np.ndarray, x: Number) -> float:
    """Evaluate a double series in u = x^(1/3) and its conjugate (principal root)."""
    z = complex(x)
    u = z ** (1.0 / 3.0) if z != 0 else 0.0
    u_bar = u.conjugate() if isinstance(u, complex) else u
    powers = np.power(u, np.arange(table.shape[0]))
    powers_bar = np.power(u_bar, np.arange(table.shape[1]))
    return float(np.real(powers @ table @ powers_bar))
