"""
Property-based tests for the correlators module.

Covers the plane and half-plane closed forms, Moebius covariance, the
n-point skeletons with pluggable weights and the free-field limit.
"""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, assume
from hypothesis import strategies as st

from loop_soup.charfn import Bernoulli, GaussianScalar, delta_layering, delta_winding
from loop_soup.correlators import (
    CorrelatorConfig,
    CutoffLayeringWeights,
    CutoffWindingWeights,
    SubsetWeightTable,
    evaluate,
    four_point_plane,
    free_field_limit,
    gamma_of,
    lambda_power_property,
    mobius_image,
    n_point_skeleton,
    one_point_halfplane,
    three_point_plane,
    two_point_halfplane,
    two_point_plane,
    winding_n_point_skeleton,
)
from loop_soup.enums import Domain, ResultFlag
from loop_soup.exceptions import ContractViolationError, DomainError, SingularityError, ValidationError
from loop_soup.models import ChargedPoint


# Strategies for insertions

coordinate = st.floats(min_value=-3.0, max_value=3.0)


@st.composite
def positions_strategy(draw, n: int, min_gap: float = 0.2) -> list[complex]:
    """Generate n well-separated points in the plane."""
    points = [complex(draw(coordinate), draw(coordinate)) for _ in range(n)]
    gaps = [abs(a - b) for i, a in enumerate(points) for b in points[i + 1 :]]
    assume(not gaps or min(gaps) > min_gap)
    return points


@st.composite
def neutral_charges_strategy(draw, n: int) -> list[float]:
    """Generate n charges summing to zero."""
    betas = [draw(st.floats(min_value=-2.0, max_value=2.0)) for _ in range(n - 1)]
    return betas + [-math.fsum(betas)]


@st.composite
def neutral_config_strategy(draw, n: int) -> CorrelatorConfig:
    """Generate a charge-neutral plane configuration with Gaussian marks."""
    zs = draw(positions_strategy(n))
    betas = draw(neutral_charges_strategy(n))
    lam = draw(st.floats(min_value=0.1, max_value=3.0))
    sigma = draw(st.floats(min_value=0.3, max_value=2.0))
    return CorrelatorConfig(lam=lam, dist=GaussianScalar(sigma), points=[ChargedPoint(z, b) for z, b in zip(zs, betas)])


@st.composite
def upper_half_plane_points_strategy(draw, n: int) -> list[complex]:
    """Generate n separated points with Im z > 0."""
    points = [
        complex(draw(st.floats(min_value=-3.0, max_value=3.0)), draw(st.floats(min_value=0.1, max_value=3.0)))
        for _ in range(n)
    ]
    gaps = [abs(a - b) for i, a in enumerate(points) for b in points[i + 1 :]]
    assume(not gaps or min(gaps) > 0.1)
    return points


def _points(zs, betas) -> list[ChargedPoint]:
    return [ChargedPoint(z, b) for z, b in zip(zs, betas)]


class TestPlaneClosedFormsProperty:
    """
    **Feature: loop-soup, Property 12: Plane closed forms**

    Two- and three-point functions are products of pairwise powers fixed by
    the layering dimensions; charge violation gives an exact, flagged zero.
    """

    def test_two_point_examples(self):
        dist = Bernoulli()
        unit = two_point_plane(CorrelatorConfig(1.0, dist, _points([0, 1], [math.pi, math.pi])))
        assert unit.value == pytest.approx(1.0)
        doubled = two_point_plane(CorrelatorConfig(1.0, dist, _points([0, 2], [math.pi, math.pi])))
        assert doubled.value == pytest.approx(2.0 ** (-0.8), rel=1e-14)

    def test_charge_violation_flagged(self):
        result = two_point_plane(CorrelatorConfig(1.0, GaussianScalar(1.0), _points([0, 1], [0.3, 0.4])))
        assert result.value == 0.0
        assert ResultFlag.CHARGE_VIOLATION.value in result.flags

    @given(zs=positions_strategy(2), beta=st.floats(min_value=-3.0, max_value=3.0), lam=st.floats(0.1, 5.0))
    @settings(max_examples=100)
    def test_two_point_power_law(self, zs, beta, lam):
        dist = GaussianScalar(1.0)
        result = two_point_plane(CorrelatorConfig(lam, dist, _points(zs, [beta, -beta])))
        expected = abs(zs[0] - zs[1]) ** (-4.0 * delta_layering(lam, dist, beta))
        assert result.value == pytest.approx(expected, rel=1e-12)

    def test_three_point_example(self):
        """Bernoulli (pi, pi, 0): only the |z12| factor survives."""
        zs = [0.0, 1.0 + 1.0j, 3.0 - 0.5j]
        result = three_point_plane(CorrelatorConfig(1.0, Bernoulli(), _points(zs, [math.pi, math.pi, 0.0])))
        expected = abs(zs[0] - zs[1]) ** (-0.8)
        assert result.value == pytest.approx(expected, rel=1e-13)

    def test_coincident_points(self):
        with pytest.raises(SingularityError):
            two_point_plane(CorrelatorConfig(1.0, Bernoulli(), _points([1j, 1j], [math.pi, math.pi])))

    def test_wrong_point_count(self):
        with pytest.raises(ValidationError):
            three_point_plane(CorrelatorConfig(1.0, Bernoulli(), _points([0, 1], [math.pi, math.pi])))

    @given(cfg=neutral_config_strategy(4))
    @settings(max_examples=50, deadline=None)
    def test_four_point_is_positive(self, cfg):
        result = four_point_plane(cfg)
        assert result.value > 0.0
        assert math.isfinite(result.value)

    def test_four_point_charge_violation(self):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([0, 1, 2j, 3], [0.1, 0.2, 0.3, 0.4]))
        result = four_point_plane(cfg)
        assert result.value == 0.0
        assert result.flags == [ResultFlag.CHARGE_VIOLATION.value]

    @given(zs=positions_strategy(4), betas=neutral_charges_strategy(3), lam=st.floats(0.2, 2.0))
    @settings(max_examples=20, deadline=None)
    def test_four_to_three_reduction(self, zs, betas, lam):
        """A neutral fourth insertion drops out of the four-point function."""
        dist = GaussianScalar(1.3)
        four = four_point_plane(CorrelatorConfig(lam, dist, _points(zs, betas + [0.0]))).value
        three = three_point_plane(CorrelatorConfig(lam, dist, _points(zs[:3], betas))).value
        assert four == pytest.approx(three, rel=1e-10)

    @given(cfg=neutral_config_strategy(4))
    @settings(max_examples=30, deadline=None)
    def test_four_point_relabeling(self, cfg):
        """Permuting insertions together with their charges leaves the value unchanged."""
        value = four_point_plane(cfg).value
        p1, p2, p3, p4 = cfg.points
        for order in ([p2, p1, p3, p4], [p1, p2, p4, p3], [p3, p4, p1, p2]):
            permuted = CorrelatorConfig(cfg.lam, cfg.dist, list(order))
            assert four_point_plane(permuted).value == pytest.approx(value, rel=1e-9)

    @given(cfg=neutral_config_strategy(3))
    @settings(max_examples=50)
    def test_lambda_power(self, cfg):
        """<...>_lam equals <...>_(1/2) raised to 2 lam."""
        lhs, rhs = lambda_power_property(cfg)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_evaluate_dispatch(self):
        dist = GaussianScalar(1.0)
        assert evaluate(CorrelatorConfig(1.0, dist, _points([0], [0.0]))).value == 1.0
        violated = evaluate(CorrelatorConfig(1.0, dist, _points([0], [1.0])))
        assert violated.value == 0.0 and violated.flags
        with pytest.raises(ValidationError):
            evaluate(CorrelatorConfig(1.0, dist, _points([0, 1, 2, 3, 4], [0.0] * 5)))
        with pytest.raises(ValidationError):
            evaluate(CorrelatorConfig(1.0, dist, _points([1j, 2j, 3j], [0.0] * 3), domain=Domain.UPPER_HALF_PLANE))


class TestMobiusCovarianceProperty:
    """
    **Feature: loop-soup, Property 13: Moebius covariance**

    Under z -> (az + b)/(cz + d) each insertion picks up |f'(z)|^(-2 Delta).
    """

    @given(
        cfg=neutral_config_strategy(4),
        a=st.floats(min_value=0.5, max_value=2.0),
        b=st.floats(min_value=-1.0, max_value=1.0),
        c=st.floats(min_value=-0.3, max_value=0.3),
    )
    @settings(max_examples=30, deadline=None)
    def test_covariance(self, cfg, a, b, c):
        d = (1.0 + b * c) / a
        assume(all(abs(c * p.z + d) > 0.2 for p in cfg.points))
        image = mobius_image(cfg.points, a, b, c, d)
        mapped = four_point_plane(CorrelatorConfig(cfg.lam, cfg.dist, list(image.points))).value
        factor = math.prod(
            modulus ** (-2.0 * delta_layering(cfg.lam, cfg.dist, p.beta))
            for modulus, p in zip(image.derivative_moduli, cfg.points)
        )
        assert mapped == pytest.approx(factor * four_point_plane(cfg).value, rel=1e-8)

    def test_identity_map(self):
        points = _points([0, 1j], [0.5, -0.5])
        image = mobius_image(points, 1, 0, 0, 1)
        assert list(image.points) == points
        assert image.derivative_moduli == (1.0, 1.0)

    def test_determinant_checked(self):
        with pytest.raises(ValidationError):
            mobius_image([0j], 2, 0, 0, 1)

    def test_pole_rejected(self):
        with pytest.raises(SingularityError):
            mobius_image([1.0 + 0j], 0, -1, 1, -1)


class TestHalfPlaneProperty:
    """
    **Feature: loop-soup, Property 14: Upper half-plane correlators**

    One-point functions follow the distance to the boundary; two-point
    functions factorize at large separation and are symmetric.
    """

    @given(zs=upper_half_plane_points_strategy(1), beta=st.floats(-3.0, 3.0))
    @settings(max_examples=50)
    def test_one_point(self, zs, beta):
        dist = GaussianScalar(1.0)
        cfg = CorrelatorConfig(1.0, dist, _points(zs, [beta]), domain=Domain.UPPER_HALF_PLANE)
        expected = (2.0 * zs[0].imag) ** (-2.0 * delta_layering(1.0, dist, beta))
        assert one_point_halfplane(cfg).value == pytest.approx(expected, rel=1e-13)

    def test_two_point_reference(self):
        """Bernoulli pi, pi at i and 1 + i against an extended-precision assembly."""
        cfg = CorrelatorConfig(
            1.0, Bernoulli(), _points([1j, 1 + 1j], [math.pi, math.pi]), domain=Domain.UPPER_HALF_PLANE
        )
        with mpmath.workdps(50):
            k = mpmath.mpf("0.4")
            sigma = mpmath.mpf(1) / 5
            t = 1 - sigma
            f_value = t * mpmath.hyp3f2(1, 1, mpmath.mpf(4) / 3, 2, mpmath.mpf(5) / 3, t)
            expected = float(mpmath.sqrt(5) ** (2 * k) * 2 ** (-2 * k) * mpmath.exp(-k * f_value))
        assert two_point_halfplane(cfg).value == pytest.approx(expected, rel=1e-12)

    @given(zs=upper_half_plane_points_strategy(2), b1=st.floats(-2.0, 2.0), b2=st.floats(-2.0, 2.0))
    @settings(max_examples=50)
    def test_symmetric(self, zs, b1, b2):
        dist = GaussianScalar(1.0)
        forward = two_point_halfplane(CorrelatorConfig(1.0, dist, _points(zs, [b1, b2]), domain="upper-half-plane"))
        backward = two_point_halfplane(
            CorrelatorConfig(1.0, dist, _points(zs[::-1], [b2, b1]), domain="upper-half-plane")
        )
        assert forward.value == pytest.approx(backward.value, rel=1e-10)

    @given(y1=st.floats(0.5, 2.0), y2=st.floats(0.5, 2.0), b1=st.floats(-2.0, 2.0), b2=st.floats(-2.0, 2.0))
    @settings(max_examples=30, deadline=None)
    def test_far_separation_factorizes(self, y1, y2, b1, b2):
        dist = GaussianScalar(1.0)

        def halfplane(zs, betas):
            return CorrelatorConfig(1.0, dist, _points(zs, betas), domain=Domain.UPPER_HALF_PLANE)

        joint = two_point_halfplane(halfplane([1j * y1, 1e6 + 1j * y2], [b1, b2])).value
        product = (
            one_point_halfplane(halfplane([1j * y1], [b1])).value
            * one_point_halfplane(halfplane([1e6 + 1j * y2], [b2])).value
        )
        assert joint == pytest.approx(product, rel=1e-6)

    def test_no_charge_conservation_in_half_plane(self):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1j, 2 + 1j], [0.3, 0.4]), domain="upper_half_plane")
        assert two_point_halfplane(cfg).value > 0.0

    def test_nearby_points_flag_integrals(self):
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([1j, 0.1 + 1j], [1.0, 1.0]), domain=Domain.UPPER_HALF_PLANE)
        assert ResultFlag.INTEGRAL_REPRESENTATION.value in two_point_halfplane(cfg).flags

    def test_unresolvable_separation(self):
        """Points 1e-11 apart pass the coincidence guard but leave 1 - sigma at 1."""
        cfg = CorrelatorConfig(
            1.0, GaussianScalar(1.0), _points([1j, 1e-11 + 1j], [0.5, 0.5]), domain=Domain.UPPER_HALF_PLANE
        )
        with pytest.raises(SingularityError) as info:
            two_point_halfplane(cfg)
        assert info.value.code == "coincident_points"

    @given(x=st.floats(1e3, 1e6), y1=st.floats(1e-9, 1e-6), y2=st.floats(1e-9, 1e-6))
    @settings(max_examples=50)
    def test_near_boundary_far_apart(self, x, y1, y2):
        cfg = CorrelatorConfig(
            1.0, GaussianScalar(1.0), _points([1j * y1, x + 1j * y2], [0.7, -0.4]), domain=Domain.UPPER_HALF_PLANE
        )
        result = two_point_halfplane(cfg)
        assert 0.0 <= 1.0 - result.diagnostics["sigma"] < 1.0
        assert math.isfinite(result.value) and result.value > 0.0

    @pytest.mark.parametrize("z", [0.5 + 0j, 1.0 - 1.0j])
    def test_outside_half_plane(self, z):
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([z], [1.0]), domain=Domain.UPPER_HALF_PLANE)
        with pytest.raises(DomainError):
            one_point_halfplane(cfg)


class TestSkeletonProperty:
    """
    **Feature: loop-soup, Property 15: n-point skeleton**

    With cutoff weights the one-point skeletons are (R/delta)^(-2 Delta)
    and (R/delta)^(-2 Delta_w); weight providers are held to their contract.
    """

    @given(beta=st.floats(-4.0, 4.0), ratio=st.floats(1.0, 100.0), lam=st.floats(0.1, 3.0))
    @settings(max_examples=100)
    def test_layering_vertex(self, beta, ratio, lam):
        dist = GaussianScalar(1.0)
        cfg = CorrelatorConfig(lam, dist, _points([0], [beta]))
        result = n_point_skeleton(cfg, CutoffLayeringWeights(delta=1.0, radius=ratio))
        expected = ratio ** (-2.0 * delta_layering(lam, dist, beta))
        assert result.value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("beta", [0.5, math.pi, 2.0])
    def test_winding_vertex(self, beta):
        """The truncated winding sum approaches (R/delta)^(-2 Delta_w)."""
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([0], [beta]))
        weights = CutoffWindingWeights(delta=1.0, radius=math.e, max_winding=2000)
        result = winding_n_point_skeleton(cfg, weights)
        expected_log = -2.0 * delta_winding(1.0, Bernoulli(), beta)
        assert abs(result.diagnostics["log_value"] - expected_log) < 2e-4

    def test_weight_table(self):
        """Explicit subset weights enter as exp[-lam alpha_S (1 - phi(beta_S))]."""
        dist = GaussianScalar(1.0)
        table = SubsetWeightTable(weights={(0,): 0.3, (1,): 0.2, (1, 0): 0.1})
        cfg = CorrelatorConfig(2.0, dist, _points([0j, 1.5 + 0j], [0.7, -0.7]))
        expected = math.exp(-2.0 * 0.5 * (1.0 - math.exp(-0.5 * 0.49)))
        assert n_point_skeleton(cfg, table).value == pytest.approx(expected, rel=1e-12)

    def test_negative_weight_is_contract_violation(self):
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([0, 1], [1.0, -1.0]))
        with pytest.raises(ContractViolationError):
            n_point_skeleton(cfg, SubsetWeightTable(weights={(0,): -1.0}))

    def test_multi_point_winding_needs_bounded_domain(self):
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([0, 1], [1.0, -1.0]))
        with pytest.raises(DomainError):
            winding_n_point_skeleton(cfg, SubsetWeightTable(max_winding=2))

    def test_bounded_winding_table(self):
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([0, 1], [1.0, -1.0]))
        table = SubsetWeightTable(
            winding_weights={((0,), (1,)): 0.1, ((0,), (-1,)): 0.1, ((1, 0), (1, 1)): 0.05},
            bounded_domain=True,
            max_winding=1,
        )
        result = winding_n_point_skeleton(cfg, table)
        expected = -0.2 * (1.0 - math.cos(1.0)) - 0.05 * (1.0 - math.cos(0.0))
        assert result.diagnostics["log_value"] == pytest.approx(expected, rel=1e-14)

    def test_too_many_points(self):
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points(range(21), [0.0] * 21))
        with pytest.raises(ValidationError):
            n_point_skeleton(cfg, SubsetWeightTable())


class TestFreeFieldLimitProperty:
    """
    **Feature: loop-soup, Property 16: Free-field limit**

    With beta_j = c_j / sqrt(lam), the four-point function tends to the
    Gaussian free field correlator as lam grows.
    """

    def test_convergence(self):
        dist = GaussianScalar(1.0)
        zs = [0j, 1.0 + 0.3j, -0.4 + 1.1j, 2.0 - 0.7j]
        cs = [1.0, -0.5, -0.7, 0.2]
        errors = []
        for lam in (1e2, 1e4, 1e6):
            betas = [c / math.sqrt(lam) for c in cs]
            value = four_point_plane(CorrelatorConfig(lam, dist, _points(zs, betas))).value
            gammas = [gamma_of(lam, dist, b) for b in betas]
            errors.append(abs(value / free_field_limit(gammas, zs) - 1.0))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-4

    def test_charges_must_cancel(self):
        with pytest.raises(ValidationError):
            free_field_limit([0.1, 0.2], [0j, 1 + 0j])

    @given(zs=positions_strategy(3))
    @settings(max_examples=30)
    def test_pairwise_product(self, zs):
        gammas = [0.3, -0.1, -0.2]
        expected = np.prod(
            [abs(zs[i] - zs[j]) ** (4 * gammas[i] * gammas[j]) for i in range(3) for j in range(i + 1, 3)]
        )
        assert free_field_limit(gammas, zs) == pytest.approx(float(expected), rel=1e-12)


class TestCorrelatorConfigProperty:
    """
    **Feature: loop-soup, Property 17: Correlator configuration validation**
    """

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf])
    def test_lambda(self, lam):
        with pytest.raises(ValidationError):
            CorrelatorConfig(lam, Bernoulli())

    def test_distribution_type(self):
        with pytest.raises(ValidationError):
            CorrelatorConfig(1.0, "bernoulli")

    def test_domain_string(self):
        assert CorrelatorConfig(1.0, Bernoulli(), domain="upper-half-plane").domain is Domain.UPPER_HALF_PLANE
        with pytest.raises(ValidationError):
            CorrelatorConfig(1.0, Bernoulli(), domain="disk")

    def test_tuple_points(self):
        cfg = CorrelatorConfig(1.0, Bernoulli(), points=[(1j, 0.5)])
        assert cfg.points == [ChargedPoint(1j, 0.5)]
        with pytest.raises(ValidationError):
            CorrelatorConfig(1.0, Bernoulli(), points=[(complex("nan"), 0.5)])
