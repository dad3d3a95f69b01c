"""
Property-based tests for the conformal block module.

Covers Virasoro and global block series, the double series of G(x) and the
extraction of block-expansion coefficients against their closed forms.
"""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, assume
from hypothesis import strategies as st

from loop_soup.blocks import (
    MAX_BLOCK_LEVEL,
    charge_dimensions,
    closed_form_C,
    expand_g_series,
    extract_coefficients,
    g_function,
    global_block_series,
    virasoro_block_series,
)
from loop_soup.charfn import Bernoulli, GaussianScalar
from loop_soup.correlators import CorrelatorConfig, four_point_plane
from loop_soup.exceptions import DegeneracyError, UnsupportedLabelError, ValidationError
from loop_soup.models import BlockLabel, ChargedPoint
from loop_soup.run_logger import RunLogger
from loop_soup.special import series_value


# Strategies for block parameters and charge configurations

weight = st.floats(min_value=0.3, max_value=1.5)


@st.composite
def gaussian_charges_strategy(draw) -> CorrelatorConfig:
    """Generate four neutral charges with Gaussian marks and a nondegenerate pair."""
    sigma = draw(st.floats(min_value=0.5, max_value=1.5))
    b1, b2, b3 = (draw(st.floats(min_value=-2.0, max_value=2.0)) for _ in range(3))
    dist = GaussianScalar(sigma)
    assume(1.0 - float(dist.characteristic(b1 + b2)) > 1e-2)
    betas = [b1, b2, b3, -(b1 + b2 + b3)]
    lam = draw(st.floats(min_value=0.2, max_value=2.0))
    return CorrelatorConfig(lam=lam, dist=dist, points=_points(betas))


def _points(betas) -> list[ChargedPoint]:
    # positions are not used by the expansion; place them at the standard frame
    zs = [1e6, 1.0, 0.5, 0.0]
    return [ChargedPoint(complex(z), b) for z, b in zip(zs, betas)]


def _close(value: float, expected: float, tol: float = 1e-6) -> bool:
    return abs(value - expected) <= tol * max(1.0, abs(expected))


class TestBlockSeriesProperty:
    """
    **Feature: loop-soup, Property 18: Block series**

    The level-one coefficient has its closed form and large central charge
    reduces Virasoro blocks to global blocks.
    """

    @given(dP=weight, d1=weight, d2=weight, d3=weight, d4=weight, c=st.floats(min_value=0.5, max_value=30.0))
    @settings(max_examples=100)
    def test_level_one(self, dP, d1, d2, d3, d4, c):
        b = virasoro_block_series(c, dP, d1, d2, d3, d4, 1)
        assert b[0] == 1.0
        assert b[1] == pytest.approx((dP + d2 - d1) * (dP + d3 - d4) / (2.0 * dP), rel=1e-12, abs=1e-14)

    @given(dP=weight, d1=weight, d2=weight, d3=weight, d4=weight)
    @settings(max_examples=50)
    def test_large_central_charge(self, dP, d1, d2, d3, d4):
        virasoro = virasoro_block_series(1e8, dP, d1, d2, d3, d4, MAX_BLOCK_LEVEL)
        global_ = global_block_series(dP, d1, d2, d3, d4, MAX_BLOCK_LEVEL)
        for v, g in zip(virasoro, global_):
            assert abs(v - g) <= 1e-6 * max(abs(g), 1e-3)

    def test_level_limit(self):
        with pytest.raises(ValidationError):
            virasoro_block_series(1.0, 0.5, 0.1, 0.1, 0.1, 0.1, MAX_BLOCK_LEVEL + 1)

    def test_null_descendant(self):
        """The vacuum at level one has a null state; the Gram degeneracy is reported."""
        with pytest.raises(DegeneracyError) as info:
            virasoro_block_series(1.0, 0.0, 0.1, 0.1, 0.1, 0.1, 1)
        assert info.value.details["level"] == 1


class TestGSeriesProperty:
    """
    **Feature: loop-soup, Property 19: Series of the reduced four-point function**

    The double series in x^(1/3) resums to G(x) near the origin.
    """

    @pytest.mark.parametrize("x", [0.05, 0.05 + 0.02j, -0.03 + 0.04j])
    def test_resums_at_order_eight(self, x):
        cfg = CorrelatorConfig(1.3, GaussianScalar(1.0), _points([0.9, -0.4, 0.7, -1.2]))
        dims = charge_dimensions(cfg)
        expected = g_function(cfg, x) / abs(x) ** (2.0 * dims.x_exponent)
        assert abs(series_value(expand_g_series(cfg, 8), x) - expected) < 1e-8

    def test_leading_terms(self):
        """h[0, 0] = 1 and h[1, 1] = 12 mu S."""
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.5, 0.2, -0.7]))
        h = expand_g_series(cfg, 4)
        assert h[0, 0] == pytest.approx(1.0)
        assert h[1, 1] == pytest.approx(closed_form_C((1, 1), cfg), rel=1e-12)

    def test_charge_violation_rejected(self):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, 0.5, 0.2, 0.1]))
        with pytest.raises(ValidationError):
            expand_g_series(cfg, 4)

    def test_limit_of_four_point_function(self):
        """|z1|^(4 D1) times the four-point function at (z1, 1, x, 0) approaches G(x) like 1/|z1|."""
        betas = [0.9, -0.4, 0.7, -1.2]
        dist = GaussianScalar(1.0)
        x = 0.3 + 0.2j
        reference = g_function(CorrelatorConfig(1.3, dist, _points(betas)), x)
        errors = []
        for z1 in (1e4, 1e6, 1e8):
            zs = [complex(z1), 1.0 + 0j, x, 0j]
            cfg = CorrelatorConfig(1.3, dist, [ChargedPoint(z, b) for z, b in zip(zs, betas)])
            d1 = charge_dimensions(cfg).d[0]
            errors.append(abs(four_point_plane(cfg).value * z1 ** (4.0 * d1) / reference - 1.0))
        assert errors[0] > errors[1] > errors[2]
        assert errors[0] < 1e-3
        assert errors[2] < 1e-8

    @given(cfg=gaussian_charges_strategy())
    @settings(max_examples=20, deadline=None)
    def test_only_integer_spin_terms(self, cfg):
        """Powers u^i conj(u)^j appear only with i - j divisible by 3."""
        h = expand_g_series(cfg, 4)
        i, j = np.nonzero(h)
        assert np.all((i - j) % 3 == 0)


class TestCoefficientExtractionProperty:
    """
    **Feature: loop-soup, Property 20: Block coefficient extraction**

    Extracted products C34 C12 agree with every available closed form.
    """

    @given(cfg=gaussian_charges_strategy())
    @settings(max_examples=20, deadline=None)
    def test_matches_closed_forms(self, cfg):
        table = extract_coefficients(cfg, pmax=5, order=4)
        assert table.coefficient(0, 0) == pytest.approx(1.0, abs=1e-12)
        for label in [(1, 1), (2, 2), (3, 3), (0, 3), (3, 0), (1, 4), (4, 1), (2, 5)]:
            assert _close(table.coefficient(*label), closed_form_C(label, cfg)), label

    @given(cfg=gaussian_charges_strategy())
    @settings(max_examples=20, deadline=None)
    def test_table_shape(self, cfg):
        table = extract_coefficients(cfg, pmax=3, order=4)
        rows = list(table.rows())
        assert len(rows) == 16
        assert rows[0][:2] == (0, 0)
        assert rows[0][2] == pytest.approx(table.delta12)
        assert table.condition_number >= 1.0

    def test_full_label_set_has_no_residual(self):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.3, 0.6, -1.3]))
        table = extract_coefficients(cfg, pmax=11, order=4)
        assert table.residual < 1e-10

    def test_mismatched_labels_vanish(self):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.3, 0.6, -1.3]))
        table = extract_coefficients(cfg, pmax=2, order=4)
        assert table.coefficient(0, 1) == pytest.approx(0.0, abs=1e-12)
        assert table.coefficient(1, 2) == pytest.approx(0.0, abs=1e-12)

    def test_bernoulli_diagonal(self):
        """With Bernoulli marks C^(0,3) vanishes and C^(3,3) = (C11)^3 / 3!."""
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([math.pi / 2, math.pi / 2, -math.pi / 2, -math.pi / 2]))
        c11 = closed_form_C((1, 1), cfg)
        assert closed_form_C((0, 3), cfg) == pytest.approx(0.0, abs=1e-15)
        assert closed_form_C((3, 3), cfg) == pytest.approx(c11**3 / 6.0, rel=1e-12)
        table = extract_coefficients(cfg, pmax=3, order=4)
        assert _close(table.coefficient(3, 3), c11**3 / 6.0)

    def test_gaussian_diagonal_carries_off_diagonal_square(self):
        """For Gaussian marks C^(0,3) is nonzero and C^(3,3) exceeds (C11)^3 / 3! by its square."""
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.3, 0.6, -1.3]))
        c11 = closed_form_C((1, 1), cfg)
        c03 = closed_form_C((0, 3), cfg)
        assert abs(c03) > 1e-4
        assert closed_form_C((3, 3), cfg) == pytest.approx(c11**3 / 6.0 + c03**2, rel=1e-12)
        extracted = extract_coefficients(cfg, pmax=3, order=4).coefficient(3, 3)
        assert extracted == pytest.approx(c11**3 / 6.0 + c03**2, rel=1e-6)
        assert abs(extracted - c11**3 / 6.0) > 0.5 * c03**2

    @given(cfg=gaussian_charges_strategy())
    @settings(max_examples=10, deadline=None)
    def test_residual_shrinks_with_pmax(self, cfg):
        residuals = [extract_coefficients(cfg, pmax=p, order=4).residual for p in range(1, 5)]
        for coarse, fine in zip(residuals, residuals[1:]):
            assert fine <= coarse * (1.0 + 1e-9) + 1e-15

    @given(cfg=gaussian_charges_strategy())
    @settings(max_examples=10, deadline=None)
    def test_no_fractional_spin_labels(self, cfg):
        """Labels with p - p' off the multiples of 3 carry no coefficient above solver precision."""
        table = extract_coefficients(cfg, pmax=11, order=4)
        scale = max(abs(table.coefficient(p, p)) for p in range(4))
        for p in range(12):
            for p_bar in range(12):
                if (p - p_bar) % 3:
                    assert abs(table.coefficient(p, p_bar)) <= 1e-12 * scale + 1e-15

    def test_degenerate_pair_dimension(self):
        """beta1 + beta2 on the charge lattice makes 1 - phi vanish."""
        cfg = CorrelatorConfig(1.0, Bernoulli(), _points([math.pi, math.pi, math.pi, math.pi]))
        with pytest.raises(DegeneracyError):
            extract_coefficients(cfg, pmax=3)
        with pytest.raises(DegeneracyError):
            closed_form_C((0, 3), cfg)

    @pytest.mark.parametrize("label", [(0, 1), (4, 4), (1, 2), BlockLabel(0, 6)])
    def test_unsupported_labels(self, label):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.3, 0.6, -1.3]))
        with pytest.raises(UnsupportedLabelError):
            closed_form_C(label, cfg)

    @pytest.mark.parametrize("pmax,order", [(-1, 4), (12, 4), (4, 1), (3, 13), (3, 0)])
    def test_invalid_ranges(self, pmax, order):
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.3, 0.6, -1.3]))
        with pytest.raises(ValidationError):
            extract_coefficients(cfg, pmax=pmax, order=order)

    def test_logs_extraction(self):
        stream = io.StringIO()
        logger = RunLogger(output_format="json", output_stream=stream)
        cfg = CorrelatorConfig(1.0, GaussianScalar(1.0), _points([1.0, -0.3, 0.6, -1.3]))
        extract_coefficients(cfg, pmax=3, logger=logger)
        entries = [e for e in logger.entries if e.component == "blocks"]
        assert entries and "residual" in entries[0].data
