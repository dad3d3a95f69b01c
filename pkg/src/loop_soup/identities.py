"""
Identity self-checks for the loop soup engine.

Runs the analytic identities the closed forms must satisfy (crossing
symmetry of A, Moebius covariance, the lambda-power law, the 4 -> 3 point
reduction, half-plane factorization, the large-c limit of Virasoro blocks
and the value of mu) and reports the largest deviation of each against its
tolerance.
"""

import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np

from .blocks import global_block_series, virasoro_block_series
from .charfn import GaussianScalar, delta_layering
from .correlators import (
    CorrelatorConfig,
    evaluate,
    four_point_plane,
    lambda_power_property,
    mobius_image,
    one_point_halfplane,
    three_point_plane,
    two_point_halfplane,
)
from .enums import Domain
from .exceptions import LoopSoupError
from .models import ChargedPoint
from .run_logger import RunLogger
from .special import a_function_direct, mu_constant, mu_reference


FAULT_MU_SHIFT = 1e-3
LARGE_CENTRAL_CHARGE = 1e8


@dataclass
class IdentityCheck:
    """Outcome of one identity."""

    name: str
    passed: bool
    max_deviation: float
    tolerance: float
    samples: int
    duration_ms: float = 0.0
    error: Optional[str] = None


@dataclass
class IdentityReport:
    """All identity checks of one run."""

    success: bool
    checks: list[IdentityCheck] = field(default_factory=list)
    total_duration_ms: float = 0.0

    @property
    def failed_checks(self) -> list[IdentityCheck]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> IdentityCheck:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "total_duration_ms": self.total_duration_ms,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "max_deviation": c.max_deviation,
                    "tolerance": c.tolerance,
                    "samples": c.samples,
                    "error": c.error,
                }
                for c in self.checks
            ],
        }


def crossing_grid(n_radii: int = 10, n_angles: int = 20) -> np.ndarray:
    """Non-real cross ratios r e^{i theta}, 0 < theta < pi, clear of 0 and 1."""
    radii = np.linspace(0.15, 0.9, n_radii)
    angles = np.linspace(0.1, math.pi - 0.1, n_angles)
    return (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


class IdentityChecker:
    """
    Runs every identity check with a fixed random stream.

    With inject_fault the constant mu used by the crossing check is shifted
    by a relative 1e-3, which the check must detect.
    """

    CROSSING_TOLERANCE = 1e-10
    WARD_TOLERANCE = 1e-8
    LAMBDA_POWER_TOLERANCE = 1e-12
    FOUR_TO_THREE_TOLERANCE = 1e-10
    FACTORIZATION_TOLERANCE = 1e-6
    VIRASORO_TOLERANCE = 1e-6
    MU_TOLERANCE = 1e-12

    def __init__(
        self,
        seed: int = 0,
        samples: int = 20,
        inject_fault: bool = False,
        logger: Optional[RunLogger] = None,
    ) -> None:
        """
        Initialize the checker.

        Args:
            seed: Seed of the random configurations
            samples: Random configurations per randomized check
            inject_fault: Perturb mu in the crossing check
            logger: Optional logger for check outcomes
        """
        self._seed = seed
        self._samples = samples
        self._inject_fault = inject_fault
        self._logger = logger

    @property
    def mu(self) -> float:
        mu = mu_constant()
        return mu * (1.0 + FAULT_MU_SHIFT) if self._inject_fault else mu

    def run(self) -> IdentityReport:
        """Run all checks; success iff every check passes."""
        start = time.perf_counter()
        rng = np.random.default_rng(self._seed)
        checks = [
            self._timed("crossing", self.CROSSING_TOLERANCE, self._crossing),
            self._timed("ward", self.WARD_TOLERANCE, lambda: self._ward(rng)),
            self._timed("lambda_power", self.LAMBDA_POWER_TOLERANCE, lambda: self._lambda_power(rng)),
            self._timed("four_to_three", self.FOUR_TO_THREE_TOLERANCE, lambda: self._four_to_three(rng)),
            self._timed("factorization", self.FACTORIZATION_TOLERANCE, lambda: self._factorization(rng)),
            self._timed("virasoro_global_limit", self.VIRASORO_TOLERANCE, lambda: self._virasoro(rng)),
            self._timed("mu_reference", self.MU_TOLERANCE, self._mu_reference),
        ]
        return IdentityReport(
            success=all(c.passed for c in checks),
            checks=checks,
            total_duration_ms=(time.perf_counter() - start) * 1000,
        )

    def _timed(self, name: str, tolerance: float, body: Callable[[], tuple[float, int]]) -> IdentityCheck:
        start = time.perf_counter()
        try:
            deviation, samples = body()
            check = IdentityCheck(
                name=name,
                passed=bool(deviation < tolerance),
                max_deviation=float(deviation),
                tolerance=tolerance,
                samples=samples,
            )
        except LoopSoupError as e:
            check = IdentityCheck(
                name=name,
                passed=False,
                max_deviation=math.inf,
                tolerance=tolerance,
                samples=0,
                error=f"{e.code}: {e.message}",
            )
        check.duration_ms = (time.perf_counter() - start) * 1000
        if self._logger:
            log = self._logger.info if check.passed else self._logger.warn
            log(
                "identities",
                f"Check {name} {'passed' if check.passed else 'failed'}",
                {"max_deviation": check.max_deviation, "tolerance": tolerance, "error": check.error},
            )
        return check

    def _crossing(self) -> tuple[float, int]:
        mu = self.mu
        grid = crossing_grid()
        worst = 0.0
        for x in grid:
            a = a_function_direct(x, mu=mu)
            worst = max(
                worst,
                abs(a - a_function_direct(1 - x, mu=mu)),
                abs(a - a_function_direct(1 / x, mu=mu) + math.log(abs(x))),
            )
        return worst, len(grid)

    def _random_betas(self, rng: np.random.Generator, n: int) -> list[float]:
        betas = list(rng.uniform(-2.0, 2.0, n - 1))
        return betas + [-math.fsum(betas)]

    def _random_points(self, rng: np.random.Generator, n: int) -> list[complex]:
        while True:
            points = list(rng.uniform(-2.0, 2.0, n) + 1j * rng.uniform(-2.0, 2.0, n))
            gaps = [abs(a - b) for i, a in enumerate(points) for b in points[i + 1 :]]
            if min(gaps) > 0.1:
                return points

    def _ward(self, rng: np.random.Generator) -> tuple[float, int]:
        dist = GaussianScalar(1.0)
        worst = 0.0
        count = 0
        for _ in range(self._samples):
            a, b, c = (complex(*rng.uniform(-1.0, 1.0, 2)) for _ in range(3))
            if abs(a) < 0.2:
                continue
            d = (1.0 + b * c) / a
            for n in (2, 3, 4):
                points = [ChargedPoint(z, beta) for z, beta in zip(self._random_points(rng, n), self._random_betas(rng, n))]
                if any(abs(c * p.z + d) < 0.1 for p in points):
                    continue
                cfg = CorrelatorConfig(lam=float(rng.uniform(0.2, 2.0)), dist=dist, points=points)
                image = mobius_image(points, a, b, c, d)
                mapped = evaluate(CorrelatorConfig(lam=cfg.lam, dist=dist, points=list(image.points))).value
                factor = math.prod(
                    modulus ** (-2.0 * delta_layering(cfg.lam, dist, p.beta))
                    for modulus, p in zip(image.derivative_moduli, points)
                )
                worst = max(worst, _relative(mapped, factor * evaluate(cfg).value))
                count += 1
        return worst, count

    def _lambda_power(self, rng: np.random.Generator) -> tuple[float, int]:
        dist = GaussianScalar(0.7)
        worst = 0.0
        for _ in range(self._samples):
            n = int(rng.integers(2, 5))
            points = [ChargedPoint(z, beta) for z, beta in zip(self._random_points(rng, n), self._random_betas(rng, n))]
            lhs, rhs = lambda_power_property(CorrelatorConfig(lam=float(rng.uniform(0.1, 3.0)), dist=dist, points=points))
            worst = max(worst, _relative(lhs, rhs))
        return worst, self._samples

    def _four_to_three(self, rng: np.random.Generator) -> tuple[float, int]:
        dist = GaussianScalar(1.3)
        worst = 0.0
        for _ in range(self._samples):
            zs = self._random_points(rng, 4)
            betas = self._random_betas(rng, 3)
            lam = float(rng.uniform(0.2, 2.0))
            four = four_point_plane(
                CorrelatorConfig(lam=lam, dist=dist, points=[ChargedPoint(z, b) for z, b in zip(zs, betas + [0.0])])
            ).value
            three = three_point_plane(
                CorrelatorConfig(lam=lam, dist=dist, points=[ChargedPoint(z, b) for z, b in zip(zs[:3], betas)])
            ).value
            worst = max(worst, _relative(four, three))
        return worst, self._samples

    def _factorization(self, rng: np.random.Generator) -> tuple[float, int]:
        dist = GaussianScalar(1.0)
        worst = 0.0
        for _ in range(self._samples):
            y1, y2 = rng.uniform(0.5, 2.0, 2)
            b1, b2 = rng.uniform(-2.0, 2.0, 2)
            p1 = ChargedPoint(complex(0.0, y1), float(b1))
            p2 = ChargedPoint(complex(1e6, y2), float(b2))

            def halfplane(*points: ChargedPoint) -> CorrelatorConfig:
                return CorrelatorConfig(lam=1.0, dist=dist, points=list(points), domain=Domain.UPPER_HALF_PLANE)

            joint = two_point_halfplane(halfplane(p1, p2)).value
            product = one_point_halfplane(halfplane(p1)).value * one_point_halfplane(halfplane(p2)).value
            worst = max(worst, _relative(joint, product))
        return worst, self._samples

    def _virasoro(self, rng: np.random.Generator) -> tuple[float, int]:
        worst = 0.0
        for _ in range(self._samples):
            dP, d1, d2, d3, d4 = rng.uniform(0.3, 1.5, 5)
            virasoro = virasoro_block_series(LARGE_CENTRAL_CHARGE, dP, d1, d2, d3, d4, 3)
            global_ = global_block_series(dP, d1, d2, d3, d4, 3)
            for v, g in zip(virasoro[1:], global_[1:]):
                worst = max(worst, abs(v - g) / max(abs(g), 1e-3))
        return worst, self._samples

    def _mu_reference(self) -> tuple[float, int]:
        return _relative(mu_constant(), mu_reference()), 1

    def print_results(self, report: IdentityReport, stream: Optional[TextIO] = None) -> None:
        """
        Print a pass/fail table.

        Args:
            report: Report to print
            stream: Output stream (defaults to sys.stdout)
        """
        out = stream or sys.stdout
        print("Identity checks", file=out)
        print("=" * 60, file=out)
        for check in report.checks:
            mark = "✓" if check.passed else "✗"
            print(
                f"  {mark} {check.name:<24} max dev {check.max_deviation:.3e}  (tol {check.tolerance:.0e})",
                file=out,
            )
            if check.error:
                print(f"      - {check.error}", file=out)
        print("=" * 60, file=out)
        status = "all passed" if report.success else f"{len(report.failed_checks)} failed"
        print(f"{status} in {report.total_duration_ms:.0f} ms", file=out)
