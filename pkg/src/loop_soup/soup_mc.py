"""
Monte Carlo sampler of the marked Brownian loop soup.

Loops are drawn from the intensity lam/(2 pi) d^2z dt/t^2 times the complex
Brownian bridge measure, restricted to a window of centers and a window of
durations, and carry iid marks. Estimators count loops whose measured
diameter lies in [delta, R) and average per-soup observables over batches.

Each batch owns a counter-based Philox stream keyed by (seed, batch index)
and a Welford accumulator, so serial and parallel runs merge to the same
bits.
"""

import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, distance

from .charfn import CustomMark, GaussianScalar, Lattice, MarkDistribution, UnitVector, delta_layering, delta_winding
from .config import MCConfig
from .enums import ErrorCode, EstimatorKind, VertexKind
from .exceptions import DomainError, MCInconclusiveError, ValidationError
from .models import EstimatorResult, LoopPath, SoupSample
from .run_logger import RunLogger


MIN_STEPS = 64
ON_BOUNDARY_TOLERANCE = 1e-12
GRID_CELL_LIMIT = 20_000_000
TRACE_STEP_LIMIT = 200_000
# segments closer to the point than REFINE_REACH sqrt(tau) are split
REFINE_REACH = 8.0
# a bridge segment rarely strays more than this many sqrt(tau) from its chord
_BOX_SLACK = 3.0
# generic ray direction; axis-parallel rays meet lattice-like test polygons at vertices
_RAY_DIRECTION = complex(math.cos(0.3141592), math.sin(0.3141592))
_PARAM_EPS = 1e-12

LOOP_DUMP_MAGIC = b"LSLOOP1\n"
_LOOP_HEADER = struct.Struct("<dddI")

LoopLike = Union[LoopPath, np.ndarray, Sequence[complex]]


# ---------------------------------------------------------------------------
# Loop sampling
# ---------------------------------------------------------------------------


def _check_duration_range(t_min: float, t_max: float) -> None:
    if not (math.isfinite(t_min) and math.isfinite(t_max) and 0 < t_min < t_max):
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Duration range must satisfy 0 < t_min < t_max, got ({t_min!r}, {t_max!r})",
            {"t_min": t_min, "t_max": t_max},
        )


def _check_steps(steps: int) -> None:
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or steps < MIN_STEPS or steps & (steps - 1):
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Bridge steps must be a power of two >= {MIN_STEPS}, got {steps!r}",
            {"steps": steps},
        )


def duration_quantile(u: Union[float, np.ndarray], t_min: float, t_max: float) -> Union[float, np.ndarray]:
    """Inverse CDF of the density proportional to 1/t^2 on [t_min, t_max]."""
    _check_duration_range(t_min, t_max)
    return t_min / (1.0 - np.asarray(u, dtype=float) * (1.0 - t_min / t_max))


def sample_duration(
    t_min: float,
    t_max: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """
    Draw loop durations from dt/t^2 on [t_min, t_max].

    Args:
        t_min: Smallest duration, > 0
        t_max: Largest duration, > t_min
        rng: Random generator
        size: Number of draws; None returns a float

    Returns:
        One duration or an array of durations

    Raises:
        ValidationError: if the range is empty or not positive
    """
    _check_duration_range(t_min, t_max)
    if size is None:
        return float(duration_quantile(rng.random(), t_min, t_max))
    return duration_quantile(rng.random(size), t_min, t_max)


def sample_bridges(durations: np.ndarray, steps: int, rng: np.random.Generator) -> np.ndarray:
    """
    Complex Brownian bridges rooted at 0, one row per duration.

    Each component is W_k - (k/M) W_M for a walk W with step variance t/M,
    so both ends are exactly 0.
    """
    _check_steps(steps)
    durations = np.asarray(durations, dtype=float)
    n = len(durations)
    increments = rng.standard_normal((n, 2, steps)) * np.sqrt(durations / steps)[:, None, None]
    walk = np.zeros((n, 2, steps + 1))
    np.cumsum(increments, axis=2, out=walk[:, :, 1:])
    fraction = np.arange(steps + 1) / steps
    bridge = walk - fraction * walk[:, :, -1:]
    return bridge[:, 0, :] + 1j * bridge[:, 1, :]


def sample_bridge(t: float, steps: int, rng: np.random.Generator, center: complex = 0j) -> LoopPath:
    """Sample one discretized loop of duration t rooted at center."""
    if not (math.isfinite(t) and t > 0):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, f"Duration must be positive, got {t!r}", {"t": t})
    offsets = sample_bridges(np.array([t]), steps, rng)[0]
    return LoopPath(center=complex(center), duration=float(t), vertices=complex(center) + offsets)


def refine_near(
    vertices: np.ndarray,
    step_duration: float,
    z: complex,
    rng: np.random.Generator,
    levels: int,
    reach: float = REFINE_REACH,
) -> np.ndarray:
    """
    Add bridge detail to the segments of a loop polygon that pass near z.

    Each segment of duration tau is a Brownian bridge between its end
    vertices, so its midpoint is their average plus a complex normal with
    component variance tau/4 (Levy construction). A pass splits every
    segment closer to z than reach * sqrt(tau); each segment is split at
    most `levels` times. Detail is only added where it can change how the
    polygon sits around z.

    Args:
        vertices: Closed polygon, first vertex repeated at the end
        step_duration: Duration of each segment of the input polygon
        z: Point the detail is added around
        rng: Random generator
        levels: Maximum number of splits per segment; 0 returns the input
        reach: Split radius in units of sqrt(tau)

    Returns:
        Closed polygon containing every input vertex
    """
    vertices = np.asarray(vertices, dtype=complex)
    if levels <= 0:
        return vertices
    taus = np.full(len(vertices) - 1, float(step_duration))
    floor = float(step_duration) / 2.0**levels
    for _ in range(levels):
        near = _segment_distances(vertices - z) < reach * np.sqrt(taus)
        split = np.flatnonzero(near & (taus > floor))
        if not split.size:
            break
        half = taus[split] / 2.0
        noise = rng.standard_normal(split.size) + 1j * rng.standard_normal(split.size)
        midpoints = 0.5 * (vertices[split] + vertices[split + 1]) + np.sqrt(half / 2.0) * noise
        vertices = np.insert(vertices, split + 1, midpoints)
        taus[split] = half
        taus = np.insert(taus, split + 1, half)
    return vertices


def sample_marks(dist: MarkDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw n iid marks.

    Unit-vector marks are returned as their projection on the charge axis,
    which is all a vertex operator e^{i beta . X} sees.

    Raises:
        ValidationError: for custom distributions without a sampler
    """
    if isinstance(dist, Lattice):
        values = np.array([dist.b * k for k, _ in dist.atoms])
        probabilities = np.array([p for _, p in dist.atoms])
        return rng.choice(values, size=n, p=probabilities)
    if isinstance(dist, GaussianScalar):
        return rng.normal(0.0, dist.sigma, size=n)
    if isinstance(dist, UnitVector):
        directions = rng.standard_normal((n, dist.d))
        return directions[:, 0] / np.linalg.norm(directions, axis=1)
    if isinstance(dist, CustomMark) and dist.sampler is not None:
        return np.asarray(dist.sampler(rng, n), dtype=float)
    raise ValidationError(
        ErrorCode.INVALID_DISTRIBUTION.value,
        "Distribution has no mark sampler",
        {"distribution": type(dist).__name__},
    )


def sample_soup(
    lam: float,
    window: tuple[float, float, float, float],
    t_range: tuple[float, float],
    steps: int,
    rng: np.random.Generator,
    dist: Optional[MarkDistribution] = None,
    observation_points: Sequence[complex] = (),
    max_diameter: Optional[float] = None,
) -> SoupSample:
    """
    Sample one soup with centers in window and durations in t_range.

    With observation points and a diameter cap, loops whose center lies
    max_diameter or farther from every point are dropped before their
    bridges are drawn; such loops can neither cover nor wind around the
    points inside the diameter window.

    Args:
        lam: Intensity, >= 0
        window: (xmin, xmax, ymin, ymax) box of loop centers
        t_range: (t_min, t_max) duration window
        steps: Bridge steps M
        rng: Random generator
        dist: Mark distribution; marks are 0 when omitted
        observation_points: Points the sample is built for
        max_diameter: Diameter cap used for pruning and padding checks

    Returns:
        SoupSample with loops, marks and padding warnings
    """
    if not (math.isfinite(lam) and lam >= 0):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, f"Intensity must be >= 0, got {lam!r}", {"lam": lam})
    xmin, xmax, ymin, ymax = (float(v) for v in window)
    if not (xmin < xmax and ymin < ymax):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "Window must have positive area", {"window": window})
    t_min, t_max = t_range
    _check_duration_range(t_min, t_max)
    _check_steps(steps)

    area = (xmax - xmin) * (ymax - ymin)
    mass_per_area = lam / (2.0 * math.pi) * (1.0 / t_min - 1.0 / t_max)
    expected = mass_per_area * area
    n = int(rng.poisson(expected))
    centers = rng.uniform(xmin, xmax, n) + 1j * rng.uniform(ymin, ymax, n)
    durations = sample_duration(t_min, t_max, rng, size=n)

    warnings: list[str] = []
    points = np.asarray(observation_points, dtype=complex)
    if points.size:
        reach = max_diameter if max_diameter is not None else 10.0 * math.sqrt(t_max)
        padding = float(
            np.min(
                np.minimum.reduce([points.real - xmin, xmax - points.real, points.imag - ymin, ymax - points.imag])
            )
        )
        if padding < reach:
            # loops centered in the disc of radius reach but outside the padded square are the only ones lost
            missed = mass_per_area * (math.pi * reach**2 - (2.0 * max(padding, 0.0)) ** 2)
            warnings.append(
                f"window padding {padding:.4g} is below {reach:.4g}; "
                f"at most {missed:.4g} loops per soup per point are missed"
            )
        if max_diameter is not None:
            near = (np.abs(centers[:, None] - points[None, :]) < max_diameter).any(axis=1)
            centers, durations = centers[near], durations[near]

    paths = centers[:, None] + sample_bridges(durations, steps, rng)
    loops = [LoopPath(center=complex(c), duration=float(t), vertices=row) for c, t, row in zip(centers, durations, paths)]
    marks = sample_marks(dist, len(loops), rng) if dist is not None else np.zeros(len(loops))
    return SoupSample(
        loops=loops,
        marks=marks,
        window=(xmin, xmax, ymin, ymax),
        t_range=(float(t_min), float(t_max)),
        expected_count=expected,
        n_poisson=n,
        warnings=warnings,
        paths=paths,
    )


# ---------------------------------------------------------------------------
# Loop geometry
# ---------------------------------------------------------------------------


def _vertices(loop: LoopLike) -> np.ndarray:
    vertices = loop.vertices if isinstance(loop, LoopPath) else loop
    vertices = np.asarray(vertices, dtype=complex).ravel()
    if len(vertices) < 2:
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "A loop needs at least two vertices")
    if vertices[0] != vertices[-1]:
        vertices = np.append(vertices, vertices[0])
    return vertices


def _cross(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (np.conj(u) * w).imag


def _segment_distances(relative: np.ndarray) -> np.ndarray:
    """Distance from the origin to each segment of the polygon with the given vertices."""
    start = relative[:-1]
    seg = np.diff(relative)
    length2 = np.abs(seg) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(length2 > 0, -(np.conj(seg) * start).real / length2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(start + t * seg)


def _gap(relative: np.ndarray) -> float:
    """Distance from the origin to the polygon with the given vertices."""
    return float(np.min(_segment_distances(relative)))


def _turns(relative: np.ndarray) -> int:
    return int(round(float(np.sum(np.angle(relative[1:] / relative[:-1]))) / (2.0 * math.pi)))


def loop_diameter(loop: LoopLike) -> float:
    """Largest distance between two vertices, taken over the convex hull."""
    vertices = _vertices(loop)
    points = np.column_stack([vertices.real, vertices.imag])
    try:
        points = points[ConvexHull(points).vertices]
    except QhullError:
        # collinear or repeated points; the full set is small or degenerate
        pass
    if len(points) < 2:
        return 0.0
    return float(distance.pdist(points).max())


def winding_number(loop: LoopLike, z: complex) -> int:
    """
    Winding number of a closed polygon around z.

    Raises:
        DomainError: if z lies on the path
    """
    relative = _vertices(loop) - complex(z)
    if _gap(relative) <= ON_BOUNDARY_TOLERANCE:
        raise DomainError(
            ErrorCode.ON_BOUNDARY.value,
            "Point lies on the loop",
            {"z": complex(z)},
        )
    return _turns(relative)


def _grid_encloses(vertices: np.ndarray, z: complex, grid_h: float) -> Optional[bool]:
    """Flood-fill test on a grid whose wall cells are the ones the polygon visits."""
    x0 = vertices.real.min() - 2.0 * grid_h
    y0 = vertices.imag.min() - 2.0 * grid_h
    nx = int(math.ceil((vertices.real.max() - x0) / grid_h)) + 3
    ny = int(math.ceil((vertices.imag.max() - y0) / grid_h)) + 3
    if nx * ny > GRID_CELL_LIMIT:
        return None

    seg = np.diff(vertices)
    counts = np.ceil(np.abs(seg) / (0.25 * grid_h)).astype(int) + 1
    owner = np.repeat(np.arange(len(seg)), counts)
    first = np.cumsum(counts) - counts
    position = np.arange(counts.sum()) - np.repeat(first, counts)
    t = position / np.repeat(np.maximum(counts - 1, 1), counts)
    samples = vertices[:-1][owner] + t * seg[owner]

    walls = np.zeros((ny, nx), dtype=bool)
    walls[((samples.imag - y0) / grid_h).astype(int), ((samples.real - x0) / grid_h).astype(int)] = True
    cx = int((z.real - x0) / grid_h)
    cy = int((z.imag - y0) / grid_h)
    if walls[cy, cx]:
        return None
    return bool(ndimage.binary_fill_holes(walls)[cy, cx])


def _trace_encloses(vertices: np.ndarray, z: complex) -> Optional[bool]:
    """
    Exact filled-interior test by walking the boundary of the face holding z.

    A ray from z finds the first edge; the walk keeps the face on its left,
    turning left at every self-crossing. Bounded faces are traced
    counterclockwise, the unbounded face clockwise.
    """
    start = vertices[:-1]
    seg = np.diff(vertices)
    m = len(seg)

    relative = start - z
    with np.errstate(divide="ignore", invalid="ignore"):
        denominator = _cross(_RAY_DIRECTION, seg)
        s = _cross(relative, seg) / denominator
        t = -_cross(_RAY_DIRECTION, relative) / denominator
    hit = (denominator != 0) & (s > 0) & (t >= 0) & (t < 1)
    if not hit.any():
        return False
    k0 = int(np.flatnonzero(hit)[np.argmin(s[hit])])
    t0 = float(t[k0])
    dir0 = 1 if _cross(_RAY_DIRECTION, seg[k0]) > 0 else -1

    cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def crossings(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if k not in cache:
            r = seg[k]
            w = start - start[k]
            with np.errstate(divide="ignore", invalid="ignore"):
                den = _cross(r, seg)
                tk = _cross(w, seg) / den
                sj = _cross(w, r) / den
            ok = (den != 0) & (tk >= 0) & (tk <= 1) & (sj >= 0) & (sj <= 1)
            ok[[k - 1, k, (k + 1) % m]] = False
            idx = np.flatnonzero(ok)
            cache[k] = (idx, tk[idx], sj[idx])
        return cache[k]

    k, position, direction = k0, t0, dir0
    corners = [start[k0] + t0 * seg[k0]]
    for step in range(TRACE_STEP_LIMIT):
        idx, tk, sj = crossings(k)
        ahead = (tk - position) * direction > _PARAM_EPS
        if ahead.any():
            nearest = np.flatnonzero(ahead)[np.argmin((tk[ahead] - position) * direction)]
            t_next = float(tk[nearest])
        else:
            nearest = None
            t_next = 1.0 if direction > 0 else 0.0

        if step and k == k0 and direction == dir0 and (t0 - position) * direction > _PARAM_EPS:
            if (t_next - t0) * direction >= 0:
                break

        if nearest is not None:
            corners.append(start[k] + t_next * seg[k])
            j = int(idx[nearest])
            moving = direction * seg[k]
            k, position, direction = j, float(sj[nearest]), (1 if _cross(moving, seg[j]) > 0 else -1)
        elif direction > 0:
            corners.append(vertices[k + 1])
            k, position = (k + 1) % m, 0.0
        else:
            corners.append(vertices[k])
            k, position = (k - 1) % m, 1.0
    else:
        return None

    ring = np.asarray(corners)
    area = 0.5 * float(np.sum(_cross(ring, np.roll(ring, -1))))
    return area > 0


def _classify(vertices: np.ndarray, z: complex, grid_h: float, need_enclosure: bool) -> Optional[tuple[int, bool]]:
    """(winding, enclosed) for a loop whose bounding box holds z; None when undecidable."""
    relative = vertices - z
    gap = _gap(relative)
    if gap <= ON_BOUNDARY_TOLERANCE:
        return None
    winding = _turns(relative)
    if not need_enclosure:
        return winding, False
    if winding != 0:
        return winding, True
    inside = None
    if gap > math.sqrt(2.0) * grid_h:
        inside = _grid_encloses(vertices, z, grid_h)
    if inside is None:
        inside = _trace_encloses(vertices, z)
    if inside is None:
        return None
    return winding, inside


def encloses_outer(loop: LoopLike, z: complex, grid_h: float) -> Optional[bool]:
    """
    Whether z lies in the filled interior of the loop.

    The filled interior is the complement of the unbounded face. Nonzero
    winding decides at once; otherwise a flood fill at resolution grid_h
    decides when z is more than a cell diagonal away from the path, and an
    exact face walk decides closer in.

    Args:
        loop: Closed polygon
        z: Query point
        grid_h: Flood-fill cell size

    Returns:
        True or False, or None when z lies on the path or the face walk
        does not close
    """
    if not (math.isfinite(grid_h) and grid_h > 0):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, f"grid_h must be positive, got {grid_h!r}")
    vertices = _vertices(loop)
    z = complex(z)
    if not (
        vertices.real.min() <= z.real <= vertices.real.max() and vertices.imag.min() <= z.imag <= vertices.imag.max()
    ):
        return False
    outcome = _classify(vertices, z, grid_h, need_enclosure=True)
    return None if outcome is None else outcome[1]


# ---------------------------------------------------------------------------
# Accumulation
# ---------------------------------------------------------------------------


class RunningStats:
    """Vector-valued Welford accumulator."""

    def __init__(self, width: int):
        self.count = 0
        self.mean = np.zeros(width)
        self._m2 = np.zeros(width)

    @property
    def width(self) -> int:
        return len(self.mean)

    def push(self, values) -> None:
        x = np.asarray(values, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (x - self.mean)

    def merge(self, other: "RunningStats") -> "RunningStats":
        """Combine two accumulators (Chan et al. pairwise update)."""
        merged = RunningStats(self.width)
        total = self.count + other.count
        if total == 0:
            return merged
        delta = other.mean - self.mean
        merged.count = total
        merged.mean = self.mean + delta * (other.count / total)
        merged._m2 = self._m2 + other._m2 + delta**2 * (self.count * other.count / total)
        return merged

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full(self.width, np.nan)
        return self._m2 / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)


# ---------------------------------------------------------------------------
# Observables and batches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoupObservable:
    """What one soup contributes to an estimator."""

    kind: EstimatorKind
    points: tuple[complex, ...]
    windings: tuple[int, ...] = ()
    betas: tuple[float, ...] = ()

    @property
    def width(self) -> int:
        if self.kind is EstimatorKind.ALPHA:
            return 1
        if self.kind is EstimatorKind.WINDING:
            return len(self.windings)
        if self.kind is EstimatorKind.SUBSETS:
            return (1 << len(self.points)) - 1
        return len(self.betas)

    @property
    def needs_enclosure(self) -> bool:
        return self.kind in (EstimatorKind.ALPHA, EstimatorKind.VERTEX_LAYERING, EstimatorKind.SUBSETS)

    def empty_values(self) -> np.ndarray:
        """Per-soup values when no loop falls in the diameter window."""
        if self.kind in (EstimatorKind.VERTEX_LAYERING, EstimatorKind.VERTEX_WINDING):
            return np.ones(self.width)
        return np.zeros(self.width)


def _diameter_window(paths: np.ndarray, delta: float, radius: float) -> np.ndarray:
    inside = np.zeros(len(paths), dtype=bool)
    if not len(paths):
        return inside
    width = paths.real.max(axis=1) - paths.real.min(axis=1)
    height = paths.imag.max(axis=1) - paths.imag.min(axis=1)
    # max(width, height) <= diameter <= hypot(width, height)
    candidates = (np.hypot(width, height) >= delta) & (np.maximum(width, height) < radius)
    for i in np.flatnonzero(candidates):
        diameter = loop_diameter(paths[i])
        inside[i] = delta <= diameter < radius
    return inside


def _measure(
    sample: SoupSample,
    observable: SoupObservable,
    config: MCConfig,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, int, int]:
    """
    Per-soup values plus (enclosure tests, indeterminate outcomes).

    With config.refine_levels > 0 and an rng, each tested loop is refined
    around the point before it is classified; boxes are widened by the
    distance a refined segment can reach.
    """
    paths = sample.paths if sample.paths is not None else np.array([loop.vertices for loop in sample.loops])
    grid_h = config.delta / config.grid_divisions
    inside = _diameter_window(paths, config.delta, config.radius)
    n_loops, n_points = len(paths), len(observable.points)
    windings = np.zeros((n_points, n_loops), dtype=int)
    enclosed = np.zeros((n_points, n_loops), dtype=bool)
    tests = indeterminate = 0

    if inside.any():
        refine = config.refine_levels > 0 and rng is not None
        step_durations = np.array([loop.duration for loop in sample.loops]) / (paths.shape[1] - 1)
        slack = _BOX_SLACK * np.sqrt(step_durations) if refine else np.zeros(n_loops)
        lo = paths.real.min(axis=1) - slack + 1j * (paths.imag.min(axis=1) - slack)
        hi = paths.real.max(axis=1) + slack + 1j * (paths.imag.max(axis=1) + slack)
        for a, z in enumerate(observable.points):
            in_box = inside & (lo.real <= z.real) & (z.real <= hi.real) & (lo.imag <= z.imag) & (z.imag <= hi.imag)
            for i in np.flatnonzero(in_box):
                tests += 1
                vertices = paths[i]
                if refine:
                    vertices = refine_near(vertices, step_durations[i], z, rng, config.refine_levels)
                outcome = _classify(vertices, z, grid_h, observable.needs_enclosure)
                if outcome is None:
                    indeterminate += 1
                    continue
                windings[a, i], enclosed[a, i] = outcome

    kind = observable.kind
    if kind is EstimatorKind.ALPHA:
        values = np.array([enclosed[0].sum() / config.lam])
    elif kind is EstimatorKind.WINDING:
        values = np.array([(windings[0] == k).sum() for k in observable.windings]) / config.lam
    elif kind is EstimatorKind.VERTEX_LAYERING:
        charge = float(np.sum(sample.marks[enclosed[0]]))
        values = np.cos(np.asarray(observable.betas) * charge)
    elif kind is EstimatorKind.VERTEX_WINDING:
        charge = float(np.sum(sample.marks * windings[0]))
        values = np.cos(np.asarray(observable.betas) * charge)
    else:
        masks = (enclosed.astype(int) << np.arange(n_points)[:, None]).sum(axis=0)
        values = np.bincount(masks[masks > 0] - 1, minlength=observable.width)[: observable.width] / config.lam
    return values.astype(float), tests, indeterminate


def duration_range(config: MCConfig) -> tuple[float, float]:
    """Duration window [(delta/m)^2, (m R)^2] for margin m."""
    margin = config.duration_margin
    return ((config.delta / margin) ** 2, (margin * config.radius) ** 2)


def observation_window(points: Sequence[complex], padding: float) -> tuple[float, float, float, float]:
    pts = np.asarray(points, dtype=complex)
    return (
        float(pts.real.min() - padding),
        float(pts.real.max() + padding),
        float(pts.imag.min() - padding),
        float(pts.imag.max() + padding),
    )


def batch_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one batch."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class _BatchTask:
    index: int
    n_soups: int
    config: MCConfig
    observable: SoupObservable
    dist: Optional[MarkDistribution]


@dataclass
class BatchOutcome:
    """Accumulated statistics of one batch."""

    index: int
    stats: RunningStats
    tests: int = 0
    indeterminate: int = 0
    loops: int = 0
    warnings: list[str] = field(default_factory=list)


def _run_batch(task: _BatchTask) -> BatchOutcome:
    config = task.config
    rng = batch_rng(config.seed, task.index)
    window = observation_window(task.observable.points, config.radius)
    t_range = duration_range(config)
    outcome = BatchOutcome(index=task.index, stats=RunningStats(task.observable.width))
    for _ in range(task.n_soups):
        sample = sample_soup(
            config.lam,
            window,
            t_range,
            config.steps,
            rng,
            dist=task.dist,
            observation_points=task.observable.points,
            max_diameter=config.radius,
        )
        values, tests, indeterminate = _measure(sample, task.observable, config, rng)
        outcome.stats.push(values)
        outcome.tests += tests
        outcome.indeterminate += indeterminate
        outcome.loops += len(sample.loops)
        for warning in sample.warnings:
            if warning not in outcome.warnings:
                outcome.warnings.append(warning)
    return outcome


@dataclass
class SamplerRun:
    """Merged statistics of all batches of one run."""

    stats: RunningStats
    tests: int
    indeterminate: int
    n_batches: int
    loops_per_soup: float
    warnings: list[str] = field(default_factory=list)
    partials: list[tuple[int, int, list[float]]] = field(default_factory=list)  # (batch, soups, means)

    @property
    def indeterminate_rate(self) -> float:
        return self.indeterminate / self.tests if self.tests else 0.0


def validate_mc_config(config: MCConfig) -> None:
    """
    Check an MCConfig before sampling.

    Raises:
        ValidationError: naming the first offending field
    """
    checks = [
        ("lam", config.lam > 0),
        ("delta", config.delta > 0),
        ("radius", config.radius >= config.delta),
        ("n_soups", config.n_soups >= 2),
        ("batch_size", config.batch_size >= 1),
        ("workers", config.workers >= 1),
        ("grid_divisions", config.grid_divisions >= 1),
        ("duration_margin", config.duration_margin >= 1),
        ("indeterminate_limit", 0 <= config.indeterminate_limit <= 1),
        ("refine_levels", config.refine_levels >= 0),
    ]
    for name, ok in checks:
        if not ok:
            raise ValidationError(
                ErrorCode.INVALID_CONFIG.value,
                f"Invalid Monte Carlo setting {name}={getattr(config, name)!r}",
                {"field": name},
            )
    _check_steps(config.steps)


class LoopSoupSampler:
    """
    Runs batches of soups for one observable and merges their statistics.

    Batches are independent; with workers > 1 they run in a process pool
    and are merged in batch order.
    """

    def __init__(
        self,
        config: MCConfig,
        dist: Optional[MarkDistribution] = None,
        logger: Optional[RunLogger] = None,
    ):
        validate_mc_config(config)
        self._config = config
        self._dist = dist
        self._logger = logger

    @property
    def config(self) -> MCConfig:
        return self._config

    @property
    def t_range(self) -> tuple[float, float]:
        return duration_range(self._config)

    @property
    def grid_h(self) -> float:
        return self._config.delta / self._config.grid_divisions

    def sample_one(self, points: Sequence[complex]) -> SoupSample:
        """The first soup of batch 0 around the given points."""
        config = self._config
        return sample_soup(
            config.lam,
            observation_window(points, config.radius),
            self.t_range,
            config.steps,
            batch_rng(config.seed, 0),
            dist=self._dist,
            observation_points=points,
            max_diameter=config.radius,
        )

    def _tasks(self, observable: SoupObservable) -> list[_BatchTask]:
        config = self._config
        full, rest = divmod(config.n_soups, config.batch_size)
        sizes = [config.batch_size] * full + ([rest] if rest else [])
        return [_BatchTask(i, size, config, observable, self._dist) for i, size in enumerate(sizes)]

    def run(self, observable: SoupObservable) -> SamplerRun:
        """
        Sample all soups and merge the batch accumulators.

        Raises:
            MCInconclusiveError: if the indeterminate enclosure rate exceeds
                the configured limit
        """
        config = self._config
        if not observable.points:
            raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "At least one observation point is required")

        if config.delta == config.radius:
            stats = RunningStats(observable.width)
            for _ in range(config.n_soups):
                stats.push(observable.empty_values())
            return SamplerRun(stats=stats, tests=0, indeterminate=0, n_batches=0, loops_per_soup=0.0)

        tasks = self._tasks(observable)
        if self._logger:
            self._logger.info(
                "mc",
                "Starting Monte Carlo run",
                {
                    "estimator": observable.kind.value,
                    "n_soups": config.n_soups,
                    "batches": len(tasks),
                    "workers": config.workers,
                    "t_range": list(self.t_range),
                },
            )

        stats = RunningStats(observable.width)
        tests = indeterminate = loops = 0
        warnings: list[str] = []
        partials = []
        if config.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                outcomes = list(pool.map(_run_batch, tasks))
        else:
            outcomes = map(_run_batch, tasks)

        for outcome in outcomes:
            stats = stats.merge(outcome.stats)
            tests += outcome.tests
            indeterminate += outcome.indeterminate
            loops += outcome.loops
            partials.append((outcome.index, outcome.stats.count, outcome.stats.mean.tolist()))
            warnings.extend(w for w in outcome.warnings if w not in warnings)
            if self._logger:
                self._logger.debug(
                    "mc",
                    "Batch complete",
                    {"batch": outcome.index, "soups": outcome.stats.count, "running_mean": stats.mean.tolist()},
                )

        run = SamplerRun(
            stats=stats,
            tests=tests,
            indeterminate=indeterminate,
            n_batches=len(tasks),
            loops_per_soup=loops / config.n_soups,
            warnings=warnings,
            partials=partials,
        )
        if run.indeterminate_rate > config.indeterminate_limit:
            error = MCInconclusiveError(
                ErrorCode.INDETERMINATE_ENCLOSURE.value,
                f"Indeterminate enclosure rate {run.indeterminate_rate:.3%} exceeds "
                f"{config.indeterminate_limit:.3%}; increase grid_divisions or steps",
                {"indeterminate_rate": run.indeterminate_rate, "tests": tests},
            )
            if self._logger:
                self._logger.log_error("mc", "Monte Carlo run inconclusive", error)
            raise error
        if self._logger:
            self._logger.info(
                "mc",
                "Monte Carlo run complete",
                {"mean": stats.mean.tolist(), "stderr": stats.stderr.tolist(), "tests": tests},
            )
        return run


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

_REFINED_NOTE = (
    "polygonal loops with {steps} steps, refined by up to {levels} midpoint levels within "
    "{reach:g} sqrt(step duration) of each point (finest segment duration t/{finest}); "
    "sub-grid straits narrower than delta/{grid} stay closed; "
    "durations truncated to [{t_min:.4g}, {t_max:.4g}]"
)
_UNREFINED_NOTE = (
    "unrefined polygonal loops with {steps} steps under-cover their continuum interiors, "
    "about 25% low for alpha at 1024 steps and shrinking roughly like steps^(-1/3); "
    "durations truncated to [{t_min:.4g}, {t_max:.4g}]"
)


def _bias_notes(config: MCConfig) -> str:
    t_min, t_max = duration_range(config)
    if config.refine_levels > 0:
        return _REFINED_NOTE.format(
            steps=config.steps,
            levels=config.refine_levels,
            reach=REFINE_REACH,
            finest=config.steps * 2**config.refine_levels,
            grid=config.grid_divisions,
            t_min=t_min,
            t_max=t_max,
        )
    return _UNREFINED_NOTE.format(steps=config.steps, t_min=t_min, t_max=t_max)


def _with_window(config: Optional[MCConfig], delta: float, radius: float, n_soups: int) -> MCConfig:
    if not (math.isfinite(delta) and math.isfinite(radius) and 0 < delta <= radius):
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Diameter window needs 0 < delta <= R, got ({delta!r}, {radius!r})",
            {"delta": delta, "radius": radius},
        )
    return replace(config or MCConfig(), delta=float(delta), radius=float(radius), n_soups=int(n_soups))


def _result(run: SamplerRun, column: int, config: MCConfig, target: Optional[float], **extra) -> EstimatorResult:
    mean = float(run.stats.mean[column])
    stderr = float(run.stats.stderr[column])
    diagnostics = {
        "target": target,
        "z_score": (mean - target) / stderr if target is not None and stderr > 0 else None,
        "indeterminate_rate": run.indeterminate_rate,
        "enclosure_tests": run.tests,
        "loops_per_soup": run.loops_per_soup,
        "batches": run.n_batches,
        "warnings": list(run.warnings),
        "batch_partials": [[index, count, means[column]] for index, count, means in run.partials],
    }
    diagnostics.update(extra)
    return EstimatorResult(
        mean=mean,
        stderr=stderr,
        n_samples=run.stats.count,
        bias_notes=_bias_notes(config),
        diagnostics=diagnostics,
    )


def estimate_alpha_layering(
    z: complex,
    delta: float,
    radius: float,
    n_soups: int,
    config: Optional[MCConfig] = None,
    logger: Optional[RunLogger] = None,
) -> EstimatorResult:
    """
    Estimate the weight of loops with delta <= diam < R covering z.

    The per-soup value is the number of such loops whose filled interior
    contains z, divided by lam; its mean estimates (1/5) log(R/delta).
    """
    cfg = _with_window(config, delta, radius, n_soups)
    run = LoopSoupSampler(cfg, logger=logger).run(SoupObservable(EstimatorKind.ALPHA, (complex(z),)))
    return _result(run, 0, cfg, math.log(radius / delta) / 5.0)


def estimate_winding_weights(
    z: complex,
    ks: Sequence[int],
    delta: float,
    radius: float,
    n_soups: int,
    config: Optional[MCConfig] = None,
    logger: Optional[RunLogger] = None,
) -> dict[int, EstimatorResult]:
    """Estimate the weights of loops winding exactly k times around z, for each k."""
    ks = tuple(int(k) for k in ks)
    if not ks or 0 in ks:
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "Winding numbers must be nonzero", {"ks": list(ks)})
    cfg = _with_window(config, delta, radius, n_soups)
    run = LoopSoupSampler(cfg, logger=logger).run(SoupObservable(EstimatorKind.WINDING, (complex(z),), windings=ks))
    scale = math.log(radius / delta) / (2.0 * math.pi**2)
    return {k: _result(run, i, cfg, scale / k**2, k=k) for i, k in enumerate(ks)}


def estimate_winding_weight(
    z: complex,
    k: int,
    delta: float,
    radius: float,
    n_soups: int,
    config: Optional[MCConfig] = None,
    logger: Optional[RunLogger] = None,
) -> EstimatorResult:
    """Estimate log(R/delta)/(2 pi^2 k^2), the weight of loops winding k times around z."""
    return estimate_winding_weights(z, (k,), delta, radius, n_soups, config, logger)[int(k)]


def estimate_vertex_onepoint(
    kind: Union[VertexKind, str],
    dist: MarkDistribution,
    beta: float,
    z: complex,
    delta: float,
    radius: float,
    n_soups: int,
    config: Optional[MCConfig] = None,
    logger: Optional[RunLogger] = None,
) -> EstimatorResult:
    """
    Estimate the one-point function of the vertex operator at z.

    The per-soup value is cos(beta N), the real part of e^{i beta N}, with N
    the marked layering or winding sum over the diameter window. The target
    is (R/delta)^(-2 Delta) with Delta the matching dimension.
    """
    kind = VertexKind(kind)
    cfg = _with_window(config, delta, radius, n_soups)
    estimator = EstimatorKind.VERTEX_LAYERING if kind is VertexKind.LAYERING else EstimatorKind.VERTEX_WINDING
    observable = SoupObservable(estimator, (complex(z),), betas=(float(beta),))
    run = LoopSoupSampler(cfg, dist=dist, logger=logger).run(observable)
    if kind is VertexKind.LAYERING:
        dimension = delta_layering(cfg.lam, dist, beta)
    else:
        dimension = delta_winding(cfg.lam, dist, beta)
    target = (radius / delta) ** (-2.0 * dimension)
    return _result(run, 0, cfg, target, kind=kind.value, beta=float(beta), dimension=dimension)


def estimate_subset_weights(
    points: Sequence[complex],
    delta: float,
    radius: float,
    n_soups: int,
    config: Optional[MCConfig] = None,
    logger: Optional[RunLogger] = None,
) -> dict[tuple[int, ...], EstimatorResult]:
    """
    Estimate alpha(S | S^c) for every nonempty subset S of the points.

    A loop counts toward S when its filled interior contains exactly the
    points of S. Keys are sorted index tuples, as SubsetWeightTable expects.
    """
    points = tuple(complex(p) for p in points)
    if not 1 <= len(points) <= 8:
        raise ValidationError(
            ErrorCode.INVALID_ARGUMENT.value,
            f"Subset weights need 1 to 8 points, got {len(points)}",
            {"n_points": len(points)},
        )
    cfg = _with_window(config, delta, radius, n_soups)
    run = LoopSoupSampler(cfg, logger=logger).run(SoupObservable(EstimatorKind.SUBSETS, points))
    results = {}
    for mask in range(1, 1 << len(points)):
        subset = tuple(i for i in range(len(points)) if mask >> i & 1)
        target = math.log(radius / delta) / 5.0 if len(points) == 1 else None
        results[subset] = _result(run, mask - 1, cfg, target, subset=list(subset))
    return results


@dataclass(frozen=True)
class TruncationShift:
    """Estimate with the configured duration window and with a 4x wider one."""

    base: EstimatorResult
    widened: EstimatorResult

    @property
    def shift(self) -> float:
        return self.widened.mean - self.base.mean

    @property
    def stderr(self) -> float:
        return math.hypot(self.base.stderr, self.widened.stderr)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "widened": self.widened.to_dict(),
            "shift": self.shift,
            "shift_stderr": self.stderr,
        }


def widened_config(config: MCConfig) -> MCConfig:
    """The configuration with the duration window widened 4x on each side."""
    return replace(config, duration_margin=config.duration_margin * 2.0)


def estimate_truncation_shift(
    estimator: Callable[[MCConfig], EstimatorResult],
    config: MCConfig,
) -> TruncationShift:
    """
    Rerun an estimator with the duration window widened 4x on each side.

    Args:
        estimator: Maps an MCConfig to an estimate
        config: Base configuration

    Returns:
        Both estimates; shift is widened minus base
    """
    base = estimator(config)
    widened = estimator(widened_config(config))
    return TruncationShift(base=base, widened=widened)


# ---------------------------------------------------------------------------
# Loop dumps
# ---------------------------------------------------------------------------


def dump_loops(path: Union[str, Path], loops: Sequence[LoopPath]) -> int:
    """
    Write loops in the binary dump format.

    Layout: magic header, then per loop little-endian binary64 center
    re/im and duration, a uint32 vertex count and the vertices as
    interleaved re/im binary64.

    Returns:
        Number of loops written
    """
    with open(path, "wb") as handle:
        handle.write(LOOP_DUMP_MAGIC)
        for loop in loops:
            vertices = np.asarray(loop.vertices, dtype=complex)
            center = complex(loop.center)
            handle.write(_LOOP_HEADER.pack(center.real, center.imag, float(loop.duration), len(vertices)))
            handle.write(np.column_stack([vertices.real, vertices.imag]).astype("<f8").tobytes())
    return len(loops)


def load_loops(path: Union[str, Path]) -> list[LoopPath]:
    """
    Read a loop dump written by dump_loops.

    Raises:
        ValidationError: on a bad header or a truncated record
    """
    data = Path(path).read_bytes()
    if not data.startswith(LOOP_DUMP_MAGIC):
        raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, f"{path} is not a loop dump", {"path": str(path)})
    offset = len(LOOP_DUMP_MAGIC)
    loops = []
    while offset < len(data):
        if offset + _LOOP_HEADER.size > len(data):
            raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "Truncated loop header", {"offset": offset})
        re, im, duration, count = _LOOP_HEADER.unpack_from(data, offset)
        offset += _LOOP_HEADER.size
        if offset + 16 * count > len(data):
            raise ValidationError(ErrorCode.INVALID_ARGUMENT.value, "Truncated loop vertices", {"offset": offset})
        flat = np.frombuffer(data, dtype="<f8", count=2 * count, offset=offset)
        offset += 16 * count
        loops.append(LoopPath(center=complex(re, im), duration=duration, vertices=flat[0::2] + 1j * flat[1::2]))
    return loops
