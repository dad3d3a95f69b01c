"""
Property-based tests for the characteristic function module.

Uses Hypothesis for property-based testing of mark distributions, the
layering and winding dimensions, and charge conservation.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, assume
from hypothesis import strategies as st

from loop_soup.charfn import (
    Bernoulli,
    CustomMark,
    GaussianScalar,
    Lattice,
    UnitVector,
    charge_conservation,
    delta_layering,
    delta_winding,
    dimensions,
    distribution_from_record,
    distribution_label,
    distribution_to_record,
    lattice_period,
    parse_distribution,
    phi,
    phi_unit_vector,
    validate_characteristic,
)
from loop_soup.exceptions import AccuracyError, ValidationError


# Strategies for generating distributions and charges

@st.composite
def lattice_strategy(draw) -> Lattice:
    """Generate valid even lattice distributions."""
    b = draw(st.floats(min_value=0.25, max_value=3.0))
    n_max = draw(st.integers(min_value=1, max_value=3))
    weights = draw(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=n_max + 1, max_size=n_max + 1))
    total = weights[0] + 2.0 * sum(weights[1:])
    atoms = [(0, weights[0] / total)]
    for n, w in enumerate(weights[1:], start=1):
        atoms += [(n, w / total), (-n, w / total)]
    return Lattice(b=b, atoms=tuple(atoms))


@st.composite
def distribution_strategy(draw):
    """Generate any shipped distribution."""
    kind = draw(st.sampled_from(["bernoulli", "lattice", "gaussian", "unit_vector"]))
    if kind == "bernoulli":
        return Bernoulli()
    if kind == "lattice":
        return draw(lattice_strategy())
    if kind == "gaussian":
        return GaussianScalar(sigma=draw(st.floats(min_value=0.1, max_value=3.0)))
    return UnitVector(d=draw(st.integers(min_value=1, max_value=6)))


charge_strategy = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)
lambda_strategy = st.floats(min_value=0.01, max_value=10.0)


class TestCharacteristicFunctionProperty:
    """
    **Feature: loop-soup, Property 1: Characteristic functions are even, real and bounded**

    For every shipped distribution and every charge, phi is real, lies in
    [-1, 1], is even, and equals 1 at the origin.
    """

    @given(dist=distribution_strategy(), beta=charge_strategy)
    @settings(max_examples=100)
    def test_bounded_and_even(self, dist, beta):
        """phi(beta) is in [-1, 1] and phi(-beta) = phi(beta)."""
        value = phi(dist, beta)
        assert -1.0 - 1e-14 <= value <= 1.0 + 1e-14
        assert abs(value - phi(dist, -beta)) < 1e-12

    @given(dist=distribution_strategy())
    @settings(max_examples=50)
    def test_normalized(self, dist):
        """phi(0) = 1."""
        assert phi(dist, 0.0) == pytest.approx(1.0, abs=1e-14)

    @given(beta=charge_strategy)
    @settings(max_examples=100)
    def test_unit_vector_d1_is_cosine(self, beta):
        """A one-dimensional unit vector is the +-1 mark."""
        assert abs(phi(UnitVector(1), beta) - math.cos(beta)) < 1e-12

    @given(dist=lattice_strategy(), beta=st.floats(min_value=-10.0, max_value=10.0))
    @settings(max_examples=100)
    def test_lattice_periodic(self, dist, beta):
        """Lattice phi has period 2 pi / b."""
        period = lattice_period(dist)
        assert abs(phi(dist, beta + period) - phi(dist, beta)) < 1e-10

    def test_known_values(self):
        """Reference values of the shipped families."""
        assert phi(Bernoulli(), math.pi) == pytest.approx(-1.0, abs=1e-15)
        assert phi(UnitVector(1), 2.0) == pytest.approx(math.cos(2.0), abs=1e-14)
        assert phi(GaussianScalar(1.0), 2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)
        assert phi_unit_vector(3, math.pi) == pytest.approx(0.0, abs=1e-14)
        assert phi_unit_vector(2, 0.0) == 1.0
        assert phi_unit_vector(1, math.pi) == pytest.approx(-1.0, abs=1e-14)

    @given(d=st.integers(min_value=1, max_value=8), beta=st.floats(min_value=0.0, max_value=60.0))
    @settings(max_examples=100)
    def test_unit_vector_agrees_with_distribution(self, d, beta):
        """phi_unit_vector matches phi(UnitVector(d), .)."""
        assert phi_unit_vector(d, beta) == phi(UnitVector(d), beta)

    @given(beta=st.floats(min_value=0.0, max_value=40.0))
    @settings(max_examples=100)
    def test_unit_vector_d3_is_sinc(self, beta):
        """In three dimensions phi is sin(beta)/beta."""
        expected = 1.0 if beta == 0.0 else math.sin(beta) / beta
        assert abs(phi_unit_vector(3, beta) - expected) < 1e-12

    def test_unit_vector_rejects_huge_charge(self):
        """Charges beyond the supported range raise AccuracyError."""
        with pytest.raises(AccuracyError):
            phi_unit_vector(4, 1e9)

    def test_invalid_dimension(self):
        """d must be a positive integer."""
        with pytest.raises(ValidationError):
            phi_unit_vector(0, 1.0)
        with pytest.raises(ValidationError):
            UnitVector(0)

    def test_unvalidated_distribution_rejected(self):
        """phi refuses objects that are not MarkDistributions."""
        with pytest.raises(ValidationError):
            phi(lambda b: math.cos(b), 1.0)


class TestDistributionValidationProperty:
    """
    **Feature: loop-soup, Property 2: Invalid distributions are rejected**

    Lattice atoms must be normalized and even; custom evaluators must pass
    grid validation.
    """

    @given(p=st.floats(min_value=0.05, max_value=0.45))
    @settings(max_examples=50)
    def test_uneven_lattice_rejected(self, p):
        """p_n != p_-n raises ValidationError."""
        with pytest.raises(ValidationError):
            Lattice(b=1.0, atoms=((1, p), (-1, 1.0 - p - 0.05), (0, 0.05)))

    @given(scale=st.floats(min_value=1.01, max_value=2.0))
    @settings(max_examples=50)
    def test_unnormalized_lattice_rejected(self, scale):
        """Probabilities summing away from 1 raise ValidationError."""
        with pytest.raises(ValidationError):
            Lattice(b=1.0, atoms=((1, 0.5 * scale), (-1, 0.5 * scale)))

    def test_centered_shifts_mean(self):
        """centered() moves a lattice mean to the origin."""
        dist = Lattice.centered(1.0, [(1, 0.5), (3, 0.5)])
        assert dist.atoms == ((-1, 0.5), (1, 0.5))

    def test_centered_rejects_off_lattice_mean(self):
        """A mean between lattice points cannot be centered."""
        with pytest.raises(ValidationError):
            Lattice.centered(1.0, [(0, 0.5), (1, 0.5)])

    def test_nonpositive_spacing_rejected(self):
        with pytest.raises(ValidationError):
            Lattice(b=0.0, atoms=((0, 1.0),))

    def test_custom_mark_validation(self):
        """A valid custom evaluator is accepted; a non-even one is not."""
        custom = CustomMark(evaluator=lambda b: math.exp(-abs(b)), name="laplace-like")
        assert phi(custom, 1.0) == pytest.approx(math.exp(-1.0))
        with pytest.raises(ValidationError):
            CustomMark(evaluator=lambda b: math.cos(b + 0.1), name="shifted")

    def test_validate_characteristic_reports_errors(self):
        """Unbounded evaluators are reported, not silently accepted."""
        check = validate_characteristic(lambda b: 1.0 + b * b)
        assert not check.valid
        assert check.errors


class TestLayeringDimensionProperty:
    """
    **Feature: loop-soup, Property 3: Layering dimension range**

    Delta(beta) = lam/10 (1 - phi(beta)) lies in [0, lam/5] and vanishes at
    beta = 0.
    """

    @given(lam=lambda_strategy, dist=distribution_strategy(), beta=charge_strategy)
    @settings(max_examples=100)
    def test_range(self, lam, dist, beta):
        delta = delta_layering(lam, dist, beta)
        assert -1e-15 <= delta <= lam / 5.0 + 1e-15

    @given(lam=lambda_strategy, dist=distribution_strategy())
    @settings(max_examples=50)
    def test_zero_charge(self, lam, dist):
        assert delta_layering(lam, dist, 0.0) == 0.0

    def test_bernoulli_pi(self):
        """Bernoulli at beta = pi gives lam/5."""
        assert delta_layering(1.0, Bernoulli(), math.pi) == pytest.approx(0.2, abs=1e-15)

    def test_gaussian_large_charge_limit(self):
        """phi -> 0 sends Delta to lam/10."""
        assert delta_layering(1.0, GaussianScalar(1.0), 50.0) == pytest.approx(0.1, abs=1e-15)

    @given(b1=st.floats(min_value=0.0, max_value=10.0), b2=st.floats(min_value=0.0, max_value=10.0))
    @settings(max_examples=100)
    def test_gaussian_monotone(self, b1, b2):
        """For Gaussian marks Delta is nondecreasing in |beta|."""
        assume(b1 <= b2)
        dist = GaussianScalar(2.0)
        assert delta_layering(1.0, dist, b1) <= delta_layering(1.0, dist, b2) + 1e-15

    @given(lam=st.one_of(st.just(0.0), st.floats(max_value=-1e-6), st.just(math.nan)))
    @settings(max_examples=20)
    def test_invalid_lambda(self, lam):
        with pytest.raises(ValidationError):
            delta_layering(lam, Bernoulli(), 1.0)


class TestWindingDimensionProperty:
    """
    **Feature: loop-soup, Property 4: Winding dimension accuracy**

    The winding series is summed to the requested absolute tolerance;
    lattice marks use the exact periodic closed form.
    """

    def test_bernoulli_pi(self):
        """Delta_w(pi) = 1/8 for Bernoulli marks at lam = 1."""
        assert delta_winding(1.0, Bernoulli(), math.pi) == pytest.approx(0.125, abs=1e-14)

    @given(beta=st.floats(min_value=0.0, max_value=2.0 * math.pi))
    @settings(max_examples=100)
    def test_bernoulli_closed_form(self, beta):
        """On [0, 2 pi] Delta_w = lam beta (2 pi - beta) / (8 pi^2)."""
        lam = 1.7
        expected = lam * beta * (2.0 * math.pi - beta) / (8.0 * math.pi**2)
        assert delta_winding(lam, Bernoulli(), beta) == pytest.approx(expected, abs=1e-13)

    def test_gaussian_brute_force(self):
        """Gaussian sigma = 1, beta = 1 matches the direct partial sum."""
        m = np.arange(1, 20, dtype=float)
        direct = float(np.sum((1.0 - np.exp(-0.5 * m * m)) / (m * m)))
        # the remaining terms are 1/m^2 to double precision
        direct += sum(1.0 / (k * k) for k in range(20, 2_000_000))
        direct += 1.0 / 2_000_000
        expected = direct / (2.0 * math.pi**2)
        assert delta_winding(1.0, GaussianScalar(1.0), 1.0) == pytest.approx(expected, abs=1e-9)

    @given(dist=distribution_strategy(), lam=lambda_strategy)
    @settings(max_examples=30)
    def test_zero_charge(self, dist, lam):
        assert delta_winding(lam, dist, 0.0) == 0.0

    @given(
        dist=st.one_of(st.builds(GaussianScalar, st.floats(min_value=0.3, max_value=2.0)), st.just(UnitVector(3))),
        beta=st.floats(min_value=0.1, max_value=8.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_tolerance_refinement(self, dist, beta):
        """A run at tol differs from a 10x finer run by less than tol."""
        tol = 1e-8
        coarse = delta_winding(1.0, dist, beta, tol=tol)
        fine = delta_winding(1.0, dist, beta, tol=tol / 10.0)
        assert coarse >= 0.0
        assert abs(coarse - fine) < tol

    @given(beta=st.floats(min_value=0.0, max_value=12.0))
    @settings(max_examples=30, deadline=None)
    def test_unit_vector_d1_matches_bernoulli(self, beta):
        assert delta_winding(1.0, UnitVector(1), beta) == pytest.approx(
            delta_winding(1.0, Bernoulli(), beta), abs=1e-14
        )

    def test_unreachable_tolerance(self):
        """A custom mark without envelope cannot reach 1e-15; the bound is reported."""
        custom = CustomMark(evaluator=lambda b: math.cos(b) * math.exp(-b * b / 100.0), name="damped")
        with pytest.raises(AccuracyError) as info:
            delta_winding(1.0, custom, 1.0, tol=1e-15)
        assert "achieved_bound" in info.value.details

    def test_invalid_tolerance(self):
        with pytest.raises(ValidationError):
            delta_winding(1.0, Bernoulli(), 1.0, tol=0.0)

    def test_dimensions_bundle(self):
        dims = dimensions(2.0, Bernoulli(), math.pi)
        assert dims.delta == pytest.approx(0.4)
        assert dims.delta_w == pytest.approx(0.25)
        assert dims.lam == 2.0


class TestChargeConservationProperty:
    """
    **Feature: loop-soup, Property 5: Charge conservation**

    Lattice marks conserve charge modulo 2 pi / b; all other marks require
    a vanishing total charge.
    """

    def test_examples(self):
        check = charge_conservation(Bernoulli(), [math.pi, math.pi])
        assert check.satisfied and check.k == 1
        check = charge_conservation(GaussianScalar(1.0), [0.3, -0.3])
        assert check.satisfied and check.k == 0
        assert not charge_conservation(GaussianScalar(1.0), [0.3, 0.3]).satisfied

    def test_periods(self):
        assert lattice_period(Bernoulli()) == pytest.approx(2.0 * math.pi)
        assert lattice_period(GaussianScalar(1.0)) is None
        assert lattice_period(Lattice(b=2.0, atoms=((-1, 0.5), (1, 0.5)))) == pytest.approx(math.pi)

    @given(
        betas=st.lists(st.floats(min_value=-5.0, max_value=5.0), min_size=1, max_size=5),
        k=st.integers(min_value=-3, max_value=3),
    )
    @settings(max_examples=100)
    def test_lattice_multiples(self, betas, k):
        """Appending the balancing charge plus k periods is conserving with that k."""
        closing = -math.fsum(betas) + 2.0 * math.pi * k
        check = charge_conservation(Bernoulli(), betas + [closing])
        assert check.satisfied
        assert check.k == k


class TestDistributionRecordProperty:
    """
    **Feature: loop-soup, Property 6: Distribution records**

    Shipped distributions serialize to {kind, params} records and back, and
    the command-line shorthands parse to the same objects.
    """

    @given(dist=distribution_strategy())
    @settings(max_examples=100)
    def test_record_restores_characteristic(self, dist):
        """A record rebuilt from JSON text has the same phi to 1e-15."""
        text = json.dumps(distribution_to_record(dist))
        restored = distribution_from_record(json.loads(text))
        for beta in (0.3, 1.7, 4.2):
            assert abs(phi(restored, beta) - phi(dist, beta)) < 1e-15

    def test_shorthands(self):
        assert isinstance(parse_distribution("bernoulli"), Bernoulli)
        assert parse_distribution("gaussian:0.5") == GaussianScalar(0.5)
        assert parse_distribution("unit-vector:3") == UnitVector(3)
        lattice = parse_distribution('{"kind": "lattice", "b": 2.0, "atoms": [[1, 0.5], [-1, 0.5]]}')
        assert lattice.b == 2.0

    @pytest.mark.parametrize("text", ["poisson", "gaussian:abc", "unit-vector", '{"kind": "lattice"}', "{bad json"])
    def test_bad_shorthands(self, text):
        with pytest.raises(ValidationError):
            parse_distribution(text)

    def test_labels(self):
        assert distribution_label(Bernoulli()) == "bernoulli"
        assert distribution_label(GaussianScalar(2.0)) == "gaussian(sigma=2)"
        assert distribution_label(UnitVector(3)) == "unit-vector(d=3)"

    def test_custom_has_no_record(self):
        custom = CustomMark(evaluator=lambda b: math.exp(-b * b), name="g")
        with pytest.raises(ValidationError):
            distribution_to_record(custom)
