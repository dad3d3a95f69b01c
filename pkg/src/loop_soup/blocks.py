"""
Conformal block expansion of the plane four-point function.

With the insertions at (infinity, 1, x, 0) the four-point function reduces to

    G(x) = exp[-2 A(x) S] |x|^(2 (D12 - D3 - D4)) |1 - x|^(2 (D14 - D2 - D3))

where Dij = Delta(beta_i + beta_j) and S = sum_i D_i - D12 - D13 - D14.
Expanding G in Virasoro blocks exposes primaries of dimensions
(D12 + p/3, D12 + p'/3); the products C34 C12 of their three-point
coefficients are recovered by matching the double series of G in
u = x^(1/3), u_bar = conj(x)^(1/3) against products of block series.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special as sc

from .charfn import charge_conservation, delta_layering
from .correlators import CorrelatorConfig
from .enums import ErrorCode
from .exceptions import DegeneracyError, UnsupportedLabelError, ValidationError
from .models import BlockLabel, CoeffTable
from .run_logger import RunLogger
from .special import MAX_SERIES_ORDER, a_series_coefficients, evaluate_a, mu_constant

MAX_BLOCK_LEVEL = 3
GRAM_CONDITION_LIMIT = 1e12
DELTA12_THRESHOLD = 1e-6
# highest u-index whose equations only need block levels <= 3
MAX_EQUATION_INDEX = 3 * (MAX_BLOCK_LEVEL + 1) - 1

Word = tuple[int, ...]
State = dict[Word, float]


class VermaModule:
    """
    Verma module of the Virasoro algebra over a primary of weight h.

    States are sparse maps from words (k1 >= ... >= kn >= 1), standing for
    L_{-k1} ... L_{-kn}|h>, to coefficients.
    """

    def __init__(self, c: float, h: float) -> None:
        self.c = float(c)
        self.h = float(h)
        self._cache: dict[tuple[int, Word], State] = {}

    def apply(self, n: int, word: Word) -> State:
        """Act with L_n on a basis word and normal-order the result."""
        key = (n, word)
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        result: State = {}
        if not word:
            if n == 0:
                result[()] = self.h
            elif n < 0:
                result[(-n,)] = 1.0
        elif n == 0:
            result[word] = self.h + sum(word)
        elif n < 0 and -n >= word[0]:
            result[(-n,) + word] = 1.0
        else:
            f, rest = word[0], word[1:]
            # L_n L_{-f} = L_{-f} L_n + (n + f) L_{n-f} + c/12 (n^3 - n) delta_{n,f}
            for inner, coeff in self.apply(n, rest).items():
                for outer, coeff2 in self.apply(-f, inner).items():
                    _accumulate(result, outer, coeff * coeff2)
            for inner, coeff in self.apply(n - f, rest).items():
                _accumulate(result, inner, (n + f) * coeff)
            if n == f:
                _accumulate(result, rest, self.c / 12.0 * (n**3 - n))

        self._cache[key] = result
        return result

    def inner_product(self, bra: Word, ket: Word) -> float:
        """<h| L_{kn} ... L_{k1} L_{-ket}|h> for bra = (k1, ..., kn)."""
        state: State = {ket: 1.0}
        for k in bra:
            nxt: State = {}
            for word, coeff in state.items():
                for image, coeff2 in self.apply(k, word).items():
                    _accumulate(nxt, image, coeff * coeff2)
            state = nxt
        return state.get((), 0.0)

    def gram_matrix(self, level: int) -> tuple[list[Word], np.ndarray]:
        words = partitions(level)
        gram = np.array([[self.inner_product(a, b) for b in words] for a in words])
        return words, gram


def _accumulate(state: State, word: Word, value: float) -> None:
    if value != 0.0:
        state[word] = state.get(word, 0.0) + value


def partitions(level: int) -> list[Word]:
    """Non-increasing integer tuples summing to level."""

    def build(remaining: int, largest: int) -> list[Word]:
        if remaining == 0:
            return [()]
        out = []
        for k in range(min(remaining, largest), 0, -1):
            out.extend((k,) + tail for tail in build(remaining - k, k))
        return out

    return build(level, level)


def _vertex_factor(word: Word, h_p: float, h_near: float, h_far: float) -> float:
    value = 1.0
    for i, k in enumerate(word):
        value *= h_p + k * h_near - h_far + sum(word[i + 1 :])
    return value


def _scaled_condition(gram: np.ndarray) -> float:
    diagonal = np.abs(np.diag(gram))
    if np.any(diagonal == 0.0):
        return math.inf
    scale = 1.0 / np.sqrt(diagonal)
    return float(np.linalg.cond(gram * np.outer(scale, scale)))


def virasoro_block_series(
    c: float,
    dP: float,
    d1: float,
    d2: float,
    d3: float,
    d4: float,
    level: int,
) -> list[float]:
    """
    Coefficients b_0..b_level of x^(dP - d3 - d4) (1 + b_1 x + b_2 x^2 + ...).

    The block is that of <O1(inf) O2(1) O3(x) O4(0)> with exchanged weight dP.
    Level 1 reproduces (dP + d2 - d1)(dP + d3 - d4) / (2 dP).

    Raises:
        ValidationError: for levels above 3
        DegeneracyError: when a Gram matrix is near singular; details name the level
    """
    if not isinstance(level, int) or level < 0 or level > MAX_BLOCK_LEVEL:
        raise ValidationError(
            ErrorCode.ORDER_TOO_LARGE.value,
            f"Block levels 0 to {MAX_BLOCK_LEVEL} are supported, got {level!r}",
        )
    module = VermaModule(c, dP)
    coefficients = [1.0]
    for n in range(1, level + 1):
        words, gram = module.gram_matrix(n)
        condition = _scaled_condition(gram)
        if not condition < GRAM_CONDITION_LIMIT:
            raise DegeneracyError(
                ErrorCode.DEGENERATE_GRAM.value,
                f"Gram matrix at level {n} is degenerate (null descendant)",
                {"level": n, "condition_number": condition, "c": c, "dP": dP},
            )
        left = np.array([_vertex_factor(w, dP, d2, d1) for w in words])
        right = np.array([_vertex_factor(w, dP, d3, d4) for w in words])
        coefficients.append(float(left @ np.linalg.solve(gram, right)))
    return coefficients


def global_block_series(dP: float, d1: float, d2: float, d3: float, d4: float, level: int) -> list[float]:
    """Series of 2F1(dP + d2 - d1, dP + d3 - d4; 2 dP; x), the large-c limit of the block."""
    a = dP + d2 - d1
    b = dP + d3 - d4
    return [float(sc.poch(a, n) * sc.poch(b, n) / (sc.poch(2 * dP, n) * math.factorial(n))) for n in range(level + 1)]


@dataclass(frozen=True)
class ChargeDimensions:
    """Dimensions entering G(x) for four charges."""

    d: tuple[float, float, float, float]
    d12: float
    d13: float
    d14: float
    phi: dict = field(default_factory=dict)

    @property
    def s(self) -> float:
        return sum(self.d) - self.d12 - self.d13 - self.d14

    @property
    def x_exponent(self) -> float:
        return self.d12 - self.d[2] - self.d[3]

    @property
    def one_minus_x_exponent(self) -> float:
        return self.d14 - self.d[1] - self.d[2]


def charge_dimensions(cfg: CorrelatorConfig) -> ChargeDimensions:
    if len(cfg.points) != 4:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"The block expansion needs four charges, got {len(cfg.points)}",
        )
    if not charge_conservation(cfg.dist, cfg.betas).satisfied:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            "Charges are not conserved; the four-point function vanishes",
            {"charge_sum": math.fsum(cfg.betas)},
        )
    b1, b2, b3, b4 = cfg.betas
    phi = {
        "1": float(cfg.dist.characteristic(b1)),
        "2": float(cfg.dist.characteristic(b2)),
        "3": float(cfg.dist.characteristic(b3)),
        "4": float(cfg.dist.characteristic(b4)),
        "12": float(cfg.dist.characteristic(b1 + b2)),
        "13": float(cfg.dist.characteristic(b1 + b3)),
        "14": float(cfg.dist.characteristic(b1 + b4)),
    }
    lam = cfg.lam
    return ChargeDimensions(
        d=tuple(delta_layering(lam, cfg.dist, b) for b in (b1, b2, b3, b4)),
        d12=delta_layering(lam, cfg.dist, b1 + b2),
        d13=delta_layering(lam, cfg.dist, b1 + b3),
        d14=delta_layering(lam, cfg.dist, b1 + b4),
        phi=phi,
    )


def g_function(cfg: CorrelatorConfig, x: Union[complex, float]) -> float:
    """
    G(x), the four-point function with z1 sent to infinity (rescaled by |z1|^(4 D1)).

    Raises:
        SingularityError: for degenerate cross ratios
    """
    dims = charge_dimensions(cfg)
    z = complex(x)
    a_value, _ = evaluate_a(z)
    log_value = (
        -2.0 * a_value * dims.s
        + 2.0 * dims.x_exponent * math.log(abs(z))
        + 2.0 * dims.one_minus_x_exponent * math.log(abs(1.0 - z))
    )
    return math.exp(log_value)


def _check_order(order: int) -> None:
    if not isinstance(order, int) or order < 1 or order > MAX_SERIES_ORDER:
        raise ValidationError(
            ErrorCode.ORDER_TOO_LARGE.value,
            f"Expansion order must be between 1 and {MAX_SERIES_ORDER}, got {order!r}",
            {"order": order, "max_order": MAX_SERIES_ORDER},
        )


def _truncated_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    size_i, size_j = a.shape
    out = np.zeros_like(a)
    for i, j in zip(*np.nonzero(a)):
        out[i:, j:] += a[i, j] * b[: size_i - i, : size_j - j]
    return out


def _truncated_exp(e: np.ndarray) -> np.ndarray:
    # e has no constant term, so powers beyond the table size vanish
    size = e.shape[0]
    result = np.zeros_like(e)
    result[0, 0] = 1.0
    term = result.copy()
    for k in range(1, 2 * size):
        term = _truncated_product(term, e) / k
        if not np.any(term):
            break
        result += term
    return result


def expand_g_series(cfg: CorrelatorConfig, order: int, mu: Optional[float] = None) -> np.ndarray:
    """
    Double series of G(x) / |x|^(2 (D12 - D3 - D4)) in u = x^(1/3) and conj(u).

    The series is exp[-2 S A(x)] (1 - x)^k (1 - conj x)^k with k = D14 - D2 - D3
    and A expanded by special.a_series_coefficients.

    Args:
        cfg: Four charges (positions unused)
        order: Highest integer power of x kept; indices run to 3 * order
        mu: Override of the constant mu

    Returns:
        Square array h with the series sum h[i, j] u^i conj(u)^j
    """
    _check_order(order)
    dims = charge_dimensions(cfg)
    exponent = -2.0 * dims.s * a_series_coefficients(order, mu=mu)
    series = _truncated_exp(exponent)

    size = series.shape[0]
    kappa = dims.one_minus_x_exponent
    binomial = np.zeros(size)
    for n in range(0, (size - 1) // 3 + 1):
        binomial[3 * n] = sc.binom(kappa, n) * (-1.0) ** n
    return _truncated_product(series, np.outer(binomial, binomial))


def closed_form_C(label: Union[BlockLabel, tuple[int, int]], cfg: CorrelatorConfig) -> float:
    """
    Closed forms of C34 C12 for the labels with known expressions.

    Diagonal labels (0, 0), (1, 1) and (2, 2) follow (C11)^n / n!. The pure
    factorial law does not hold at (3, 3): the primary at p = p' = 3 also
    carries the product C03 C30 = (C03)^2, so
    C33 = (C11)^3 / 3! + (C03)^2. The factorial value is recovered only when
    C03 vanishes, as it does for Bernoulli marks.

    Raises:
        UnsupportedLabelError: for labels without a closed form
        DegeneracyError: for off-diagonal labels when 1 - phi(beta1 + beta2) <= 1e-6
    """
    if not isinstance(label, BlockLabel):
        label = BlockLabel(*label)
    p, p_bar = label.p, label.p_bar
    dims = charge_dimensions(cfg)
    phi = dims.phi
    lam = cfg.lam
    c11 = 6.0 / 5.0 * lam * mu_constant() * (
        1.0 - phi["1"] - phi["2"] - phi["3"] - phi["4"] + phi["12"] + phi["13"] + phi["14"]
    )

    if p == p_bar and p <= 3:
        value = c11**p / math.factorial(p)
        if p == 3:
            value += closed_form_C(BlockLabel(0, 3), cfg) ** 2
        return value

    low, high = sorted((p, p_bar))
    if (low, high) not in ((0, 3), (1, 4), (2, 5)):
        raise UnsupportedLabelError(
            ErrorCode.UNSUPPORTED_LABEL.value,
            f"No closed form is available for label ({p}, {p_bar})",
            {"p": p, "p_bar": p_bar},
        )

    gap = 1.0 - phi["12"]
    if abs(gap) <= DELTA12_THRESHOLD:
        raise DegeneracyError(
            ErrorCode.DEGENERATE_DIMENSION.value,
            "1 - phi(beta1 + beta2) vanishes; off-diagonal coefficients are undefined",
            {"gap": gap},
        )
    mixed = (phi["1"] - phi["2"]) * (phi["3"] - phi["4"])
    tail = -phi["13"] + phi["14"]
    if low == 0:
        return lam / 20.0 * (mixed / gap + tail)
    if low == 1:
        return lam / 20.0 * c11 * (3.0 * lam * mixed / (10.0 + 3.0 * lam * gap) + tail)
    return lam / 40.0 * c11**2 * (3.0 * lam * mixed / (20.0 + 3.0 * lam * gap) + tail)


def block_matrix(
    dims: ChargeDimensions,
    central_charge: float,
    max_index: int,
) -> tuple[list[BlockLabel], np.ndarray]:
    """
    Linear map from products C^(p,p') to series coefficients h[i, j], i, j <= max_index.

    Column (p, p') holds b_m(p) b_m'(p') at row (p + 3m, p' + 3m'), where b(p)
    is the block series with exchanged weight D12 + p/3.
    """
    d1, d2, d3, d4 = dims.d
    blocks = [
        virasoro_block_series(central_charge, dims.d12 + p / 3.0, d1, d2, d3, d4, (max_index - p) // 3)
        for p in range(max_index + 1)
    ]
    side = max_index + 1
    labels = [BlockLabel(p, pb) for p in range(side) for pb in range(side)]
    matrix = np.zeros((side * side, len(labels)))
    for col, label in enumerate(labels):
        for m, b_m in enumerate(blocks[label.p]):
            i = label.p + 3 * m
            for mb, b_mb in enumerate(blocks[label.p_bar]):
                j = label.p_bar + 3 * mb
                matrix[i * side + j, col] = b_m * b_mb
    return labels, matrix


def g_series_table(cfg: CorrelatorConfig, order: int, max_index: int) -> np.ndarray:
    """Coefficients h[i, j] of the G series up to max_index in each variable."""
    return expand_g_series(cfg, order)[: max_index + 1, : max_index + 1]


def extract_coefficients(
    cfg: CorrelatorConfig,
    pmax: int,
    order: int = 4,
    logger: Optional[RunLogger] = None,
) -> CoeffTable:
    """
    Solve for C34 C12 on labels (p, p') with p, p' <= pmax.

    Equations are the series coefficients h[i, j] for i, j <= min(3 order, 11),
    which need block levels up to 3 only. The system over all labels up to that
    index is square and unit triangular; its solution restricted to p, p' <= pmax
    is returned. The reported residual is the least-squares misfit of those
    equations using only the labels p, p' <= pmax.

    Raises:
        DegeneracyError: if 1 - phi(beta1 + beta2) <= 1e-6 or a Gram matrix degenerates
        ValidationError: if pmax exceeds the equation range
    """
    _check_order(order)
    max_index = min(3 * order, MAX_EQUATION_INDEX)
    if not isinstance(pmax, int) or pmax < 0 or pmax > max_index:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"pmax must be between 0 and {max_index} at order {order}, got {pmax!r}",
            {"pmax": pmax, "max_index": max_index},
        )

    dims = charge_dimensions(cfg)
    gap = 1.0 - dims.phi["12"]
    if abs(gap) <= DELTA12_THRESHOLD:
        raise DegeneracyError(
            ErrorCode.DEGENERATE_DIMENSION.value,
            "1 - phi(beta1 + beta2) vanishes; the exchanged dimensions degenerate",
            {"gap": gap, "threshold": DELTA12_THRESHOLD},
        )

    h = g_series_table(cfg, order, max_index).ravel()
    labels, matrix = block_matrix(dims, 2.0 * cfg.lam, max_index)
    solution = np.linalg.solve(matrix, h)
    condition = float(np.linalg.cond(matrix))

    kept = [col for col, label in enumerate(labels) if label.p <= pmax and label.p_bar <= pmax]
    fitted, *_ = np.linalg.lstsq(matrix[:, kept], h, rcond=None)
    residual = float(np.linalg.norm(h - matrix[:, kept] @ fitted))

    entries = {labels[col]: float(solution[col]) for col in kept}
    if logger:
        logger.info(
            "blocks",
            "Extracted block coefficients",
            {"pmax": pmax, "order": order, "residual": residual, "condition_number": condition},
        )
    return CoeffTable(
        entries=entries,
        delta12=dims.d12,
        order=order,
        residual=residual,
        condition_number=condition,
        pmax=pmax,
    )
