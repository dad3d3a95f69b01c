"""
Property-based tests for the identity self-checks.
"""

import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loop_soup.identities import FAULT_MU_SHIFT, IdentityChecker, IdentityReport, crossing_grid
from loop_soup.run_logger import RunLogger
from loop_soup.special import mu_constant


EXPECTED_CHECKS = [
    "crossing",
    "ward",
    "lambda_power",
    "four_to_three",
    "factorization",
    "virasoro_global_limit",
    "mu_reference",
]


@pytest.fixture(scope="module")
def clean_report() -> IdentityReport:
    return IdentityChecker(seed=1, samples=5).run()


@pytest.fixture(scope="module")
def faulty_report() -> IdentityReport:
    return IdentityChecker(seed=1, samples=5, inject_fault=True).run()


class TestIdentityChecksProperty:
    """
    **Feature: loop-soup, Property 29: Identity self-checks**

    Every identity holds for the shipped implementation and a perturbed mu
    is caught by the crossing check.
    """

    def test_all_checks_pass(self, clean_report):
        assert [c.name for c in clean_report.checks] == EXPECTED_CHECKS
        assert clean_report.success, [(c.name, c.max_deviation, c.error) for c in clean_report.failed_checks]
        for check in clean_report.checks:
            assert check.max_deviation < check.tolerance
            assert check.samples >= 1

    def test_fault_is_detected(self, faulty_report):
        assert not faulty_report.success
        assert [c.name for c in faulty_report.failed_checks] == ["crossing"]
        assert faulty_report.check("crossing").max_deviation > 1e-8

    def test_fault_shifts_mu(self):
        checker = IdentityChecker(inject_fault=True)
        assert checker.mu == pytest.approx(mu_constant() * (1.0 + FAULT_MU_SHIFT))
        assert IdentityChecker().mu == mu_constant()

    @given(seed=st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=5, deadline=None)
    def test_randomized_checks_hold_for_any_seed(self, seed):
        report = IdentityChecker(seed=seed, samples=3).run()
        assert report.success, [(c.name, c.max_deviation) for c in report.failed_checks]

    def test_crossing_grid_avoids_real_axis(self):
        grid = crossing_grid()
        assert grid.shape == (200,)
        assert np.all(grid.imag > 0)
        assert np.all(np.abs(grid) < 1.0)


class TestIdentityReportingProperty:
    """
    **Feature: loop-soup, Property 30: Identity reporting**

    Reports serialize to plain JSON and print one line per check.
    """

    def test_to_dict_is_json(self, faulty_report):
        record = json.loads(json.dumps(faulty_report.to_dict()))
        assert record["success"] is False
        assert [c["name"] for c in record["checks"]] == EXPECTED_CHECKS
        assert record["checks"][0]["passed"] is False

    def test_print_results(self, clean_report, faulty_report):
        stream = io.StringIO()
        checker = IdentityChecker()
        checker.print_results(clean_report, stream)
        text = stream.getvalue()
        for name in EXPECTED_CHECKS:
            assert name in text
        assert "all passed" in text

        stream = io.StringIO()
        checker.print_results(faulty_report, stream)
        assert "1 failed" in stream.getvalue()

    def test_logger_records_each_check(self):
        stream = io.StringIO()
        logger = RunLogger(output_format="json", output_stream=stream)
        IdentityChecker(samples=2, inject_fault=True, logger=logger).run()
        entries = [e for e in logger.entries if e.component == "identities"]
        assert len(entries) == len(EXPECTED_CHECKS)
        assert any("failed" in e.message for e in entries)
