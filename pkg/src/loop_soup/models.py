"""
Data models for the loop soup engine.

This module defines the plain records passed between modules: charged
insertions, dimension bundles, correlator results, block labels and
coefficient tables, discretized loops, soup samples and Monte Carlo
estimates.
"""

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np


@dataclass(frozen=True)
class ChargedPoint:
    """An insertion of a vertex operator with charge beta at z."""

    z: complex
    beta: float


@dataclass(frozen=True)
class Dimensions:
    """Layering and winding dimensions of one charge."""

    delta: float  # layering dimension, in [0, lam/5]
    delta_w: float  # winding dimension
    lam: float  # intensity; central charge c = 2 * lam


@dataclass(frozen=True)
class ChargeCheck:
    """Outcome of the charge conservation test."""

    satisfied: bool
    k: Optional[int] = None  # multiple of the lattice period, 0 off-lattice


@dataclass(frozen=True)
class CrossRatio:
    """Cross ratio of four insertions; 0, 1 and infinity are excluded."""

    x: complex

    SINGULAR_TOLERANCE = 1e-13

    @property
    def is_degenerate(self) -> bool:
        x = self.x
        if not np.isfinite(x.real) or not np.isfinite(x.imag):
            return True
        return abs(x) < self.SINGULAR_TOLERANCE or abs(1 - x) < self.SINGULAR_TOLERANCE


@dataclass
class CorrelatorResult:
    """Value of a correlator with flags and diagnostics."""

    value: float
    flags: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)  # x, A(x), dims, ...

    def to_dict(self) -> dict:
        return {"value": self.value, "flags": list(self.flags), "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class MobiusImage:
    """Images of insertions under a Moebius map and |f'(z_j)| at each."""

    points: tuple[ChargedPoint, ...]
    derivative_moduli: tuple[float, ...]


@dataclass(frozen=True, order=True)
class BlockLabel:
    """Primary of dimensions (Delta_12 + p/3, Delta_12 + p_bar/3)."""

    p: int
    p_bar: int


@dataclass
class CoeffTable:
    """Extracted products C_34^(p,p') C_12^(p,p') of the block expansion."""

    entries: dict[BlockLabel, float]
    delta12: float
    order: int
    residual: float
    condition_number: float
    pmax: int

    def coefficient(self, p: int, p_bar: int) -> float:
        return self.entries[BlockLabel(p, p_bar)]

    def rows(self) -> Iterator[tuple[int, int, float, float, float, float]]:
        """Yield (p, p_bar, delta, delta_bar, coeff, residual) in label order."""
        for label in sorted(self.entries):
            yield (
                label.p,
                label.p_bar,
                self.delta12 + label.p / 3.0,
                self.delta12 + label.p_bar / 3.0,
                self.entries[label],
                self.residual,
            )


@dataclass
class LoopPath:
    """A discretized Brownian loop rooted at center."""

    center: complex
    duration: float  # t, in area units
    vertices: np.ndarray  # M + 1 complex points, first == last

    @property
    def steps(self) -> int:
        return len(self.vertices) - 1


@dataclass
class SoupSample:
    """One realization of the marked loop soup inside a window."""

    loops: list[LoopPath]
    marks: np.ndarray
    window: tuple[float, float, float, float]  # (xmin, xmax, ymin, ymax)
    t_range: tuple[float, float]
    expected_count: float = 0.0
    n_poisson: int = 0  # loops drawn before pruning far from the observation points
    warnings: list[str] = field(default_factory=list)
    paths: Optional[np.ndarray] = None  # stacked vertices, one row per loop


@dataclass
class EstimatorResult:
    """Monte Carlo estimate with its standard error."""

    mean: float
    stderr: float
    n_samples: int
    bias_notes: str = ""
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimate": self.mean,
            "stderr": self.stderr,
            "n": self.n_samples,
            "bias_notes": self.bias_notes,
            "diagnostics": self.diagnostics,
        }
