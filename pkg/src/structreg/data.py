"""Data containers, domain descriptors, seeded RNG streams, and splitting primitives.

Everything in this module is immutable after construction and safe to share
across threads. Randomized operations take a :class:`SeededRng` value and are
pure functions of it: calling them twice with the same rng yields identical
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Invalid data container or incompatible shapes."""


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"{name} must be a vector or matrix, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Observed sample of covariates and outcomes.

    Parameters
    ----------
    inputs : (N, p) array
        Covariate rows.
    outcome : (N,) array
        Outcome per row.
    instruments : (N, l) array, optional
        Instrument rows for moment-based estimators.
    time_index : (N,) int array, optional
        Integer period labels for time-ordered data.
    """

    inputs: np.ndarray
    outcome: np.ndarray
    instruments: np.ndarray | None = None
    time_index: np.ndarray | None = None

    def __post_init__(self):
        inputs = _as_matrix(self.inputs, "inputs")
        outcome = np.asarray(self.outcome, dtype=float).ravel()
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outcome", outcome)
        n = inputs.shape[0]
        if n == 0:
            raise DataError("empty dataset")
        if outcome.shape[0] != n:
            raise DataError(f"outcome has {outcome.shape[0]} rows, inputs have {n}")
        if not np.isfinite(inputs).all() or not np.isfinite(outcome).all():
            raise DataError("non-finite entries in dataset")
        if self.instruments is not None:
            z = _as_matrix(self.instruments, "instruments")
            object.__setattr__(self, "instruments", z)
            if z.shape[0] != n:
                raise DataError(f"instruments have {z.shape[0]} rows, inputs have {n}")
            if not np.isfinite(z).all():
                raise DataError("non-finite entries in instruments")
        if self.time_index is not None:
            t = np.asarray(self.time_index)
            if not np.issubdtype(t.dtype, np.integer):
                t = t.astype(np.int64)
            object.__setattr__(self, "time_index", t.ravel())
            if self.time_index.shape[0] != n:
                raise DataError("time_index length does not match inputs")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        """Row subset, preserving optional columns."""
        idx = np.asarray(indices)
        return Dataset(
            self.inputs[idx],
            self.outcome[idx],
            None if self.instruments is None else self.instruments[idx],
            None if self.time_index is None else self.time_index[idx],
        )


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box of closed per-dimension intervals."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("lower and upper must be vectors of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise DataError("non-finite domain bounds")
        if np.any(lo > hi):
            raise DataError("domain requires lower <= upper in every dimension")

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "DomainSpec":
        return cls(np.array([lo]), np.array([hi]))

    @classmethod
    def from_points(cls, points) -> "DomainSpec":
        """Bounding box of a finite point set."""
        pts = _as_matrix(points, "points")
        return cls(pts.min(axis=0), pts.max(axis=0))

    def contains(self, x) -> np.ndarray:
        pts = _as_matrix(x, "x")
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def point_distance(self, x) -> np.ndarray:
        """Euclidean distance from each point to the nearest point of the box.

        Zero for points inside the box.
        """
        pts = _as_matrix(x, "x")
        if pts.shape[1] != self.dimension:
            raise DataError("point dimension does not match domain")
        gap = np.maximum(self.lower - pts, 0.0) + np.maximum(pts - self.upper, 0.0)
        return np.sqrt((gap**2).sum(axis=1))


@dataclass(frozen=True)
class StandardizeTransform:
    """Column-wise affine transform fitted by :func:`standardize`.

    ``column_scales`` are strictly positive; zero-variance columns keep scale 1
    (centered only). The outcome is centered by ``outcome_mean``.
    """

    column_means: np.ndarray
    column_scales: np.ndarray
    outcome_mean: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.column_means, dtype=float))
        sc = np.atleast_1d(np.asarray(self.column_scales, dtype=float))
        object.__setattr__(self, "column_means", mu)
        object.__setattr__(self, "column_scales", sc)
        if mu.shape != sc.shape:
            raise DataError("means and scales must have equal length")
        if np.any(sc <= 0):
            raise DataError("scales must be strictly positive")

    def transform_inputs(self, X) -> np.ndarray:
        X = _as_matrix(X, "X")
        return (X - self.column_means) / self.column_scales

    def invert_inputs(self, X_std) -> np.ndarray:
        X_std = _as_matrix(X_std, "X_std")
        return X_std * self.column_scales + self.column_means

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(
            self.transform_inputs(data.inputs),
            data.outcome - self.outcome_mean,
            data.instruments,
            data.time_index,
        )

    def invert(self, data: Dataset) -> Dataset:
        return Dataset(
            self.invert_inputs(data.inputs),
            data.outcome + self.outcome_mean,
            data.instruments,
            data.time_index,
        )


def standardize(data: Dataset) -> tuple[Dataset, StandardizeTransform]:
    """Center every input column and scale nondegenerate columns to unit spread.

    Scales are the per-column standard deviations of the sample (``ddof=0``);
    columns with zero variance are centered but left unscaled. The outcome is
    centered by its mean.

    Returns
    -------
    (Dataset, StandardizeTransform)
        The transformed data and the transform that reproduces the original
        data via :meth:`StandardizeTransform.invert`.
    """
    if data.n < 2:
        raise DataError("standardize requires at least two rows")
    means = data.inputs.mean(axis=0)
    scales = data.inputs.std(axis=0, ddof=0)
    scales = np.where(scales > 0.0, scales, 1.0)
    transform = StandardizeTransform(means, scales, float(data.outcome.mean()))
    return transform.apply(data), transform


@dataclass(frozen=True)
class SeededRng:
    """Deterministic, splittable random stream.

    A value object: ``generator()`` builds a fresh counter-based generator, so
    repeated calls replay the same draw sequence. Distinct ``stream_index``
    values (and distinct ``split`` paths) give statistically independent
    streams, which is how parallel Monte Carlo trials stay reproducible.
    """

    base_seed: int
    stream_index: int = 0
    subkey: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not (0 <= int(self.base_seed) < 2**64):
            raise DataError("base_seed must fit in 64 unsigned bits")
        if not (0 <= int(self.stream_index) < 2**64):
            raise DataError("stream_index must fit in 64 unsigned bits")

    def stream(self, index: int) -> "SeededRng":
        """The rng for an independent top-level stream (e.g. trial number)."""
        return SeededRng(self.base_seed, index)

    def split(self, *indices: int) -> "SeededRng":
        """A child rng, independent across distinct index paths."""
        return SeededRng(self.base_seed, self.stream_index, self.subkey + tuple(indices))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.base_seed, spawn_key=(self.stream_index, *self.subkey)
        )
        return np.random.Generator(np.random.Philox(seq))


def partition_indices(n: int, K: int, rng: SeededRng) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into K near-equal index groups.

    Group sizes differ by at most one; the assignment depends only on the rng.
    Indices within each group are sorted.
    """
    if K < 2:
        raise DataError("partition requires K >= 2")
    if K > n:
        raise DataError(f"cannot partition {n} rows into {K} parts")
    perm = rng.generator().permutation(n)
    base, extra = divmod(n, K)
    folds, start = [], 0
    for k in range(K):
        size = base + (1 if k < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def partition(data: Dataset, K: int, rng: SeededRng) -> list[Dataset]:
    """Randomly partition a sample into K equal-sized (±1) disjoint parts."""
    return [data.subset(idx) for idx in partition_indices(data.n, K, rng)]


def _directed_box_box(a: DomainSpec, b: DomainSpec) -> float:
    # sup over x in a of dist(x, b); separable over dimensions, the per-axis
    # sup is attained at an interval endpoint.
    lo_d = np.maximum(b.lower - a.lower, 0.0) + np.maximum(a.lower - b.upper, 0.0)
    hi_d = np.maximum(b.lower - a.upper, 0.0) + np.maximum(a.upper - b.upper, 0.0)
    worst = np.maximum(lo_d, hi_d)
    return float(np.sqrt((worst**2).sum()))


def _directed_points_points(a: np.ndarray, b: np.ndarray) -> float:
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    return float(dist.min(axis=1).max())


def _directed_interval_points(a: DomainSpec, pts: np.ndarray) -> float:
    # 1-D: sup over the interval of distance to the nearest point. Candidates
    # are the interval endpoints and midpoints of consecutive sites.
    lo, hi = float(a.lower[0]), float(a.upper[0])
    sites = np.sort(pts.ravel())
    candidates = [lo, hi]
    mids = 0.5 * (sites[:-1] + sites[1:])
    candidates.extend(np.clip(mids, lo, hi).tolist())
    cand = np.asarray(candidates)
    dist = np.abs(cand[:, None] - sites[None, :]).min(axis=1)
    return float(dist.max())


def _box_grid(box: DomainSpec, per_axis: int) -> np.ndarray:
    axes = [np.linspace(box.lower[d], box.upper[d], per_axis) for d in range(box.dimension)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def hausdorff_distance(a, b, *, grid_per_axis: int = 64) -> float:
    """Hausdorff distance between two compact sets under the Euclidean metric.

    Each argument is either a :class:`DomainSpec` box or a finite point set
    (array of shape ``(m, p)`` or ``(m,)``). Box/box and point/point pairs are
    computed exactly; a mixed pair is exact in one dimension and falls back to
    a deterministic grid discretization of the box (``grid_per_axis`` points
    per axis) in higher dimensions.
    """
    a_box = isinstance(a, DomainSpec)
    b_box = isinstance(b, DomainSpec)
    a_pts = None if a_box else _as_matrix(a, "a")
    b_pts = None if b_box else _as_matrix(b, "b")
    dim_a = a.dimension if a_box else a_pts.shape[1]
    dim_b = b.dimension if b_box else b_pts.shape[1]
    if dim_a != dim_b:
        raise DataError(f"dimension mismatch: {dim_a} vs {dim_b}")
    if (a_pts is not None and a_pts.shape[0] == 0) or (b_pts is not None and b_pts.shape[0] == 0):
        raise DataError("point sets must be nonempty")

    if a_box and b_box:
        return max(_directed_box_box(a, b), _directed_box_box(b, a))
    if not a_box and not b_box:
        return max(
            _directed_points_points(a_pts, b_pts), _directed_points_points(b_pts, a_pts)
        )

    box, pts = (a, b_pts) if a_box else (b, a_pts)
    d_pts_box = float(box.point_distance(pts).max())
    if box.dimension == 1:
        d_box_pts = _directed_interval_points(box, pts)
    else:
        d_box_pts = _directed_points_points(_box_grid(box, grid_per_axis), pts)
    return max(d_pts_box, d_box_pts)


def forward_split(
    data: Dataset, target: DomainSpec, fraction: float = 1.0 / 6.0
) -> tuple[Dataset, Dataset]:
    """Split a sample so the second part sits nearest a target input region.

    The second part collects the ``ceil(fraction * N)`` observations whose
    inputs are closest to the target box (distance to the nearest box point;
    ties broken by distance to the box center, then by original row index).
    By construction its input hull is at least as close to the target, in
    Hausdorff distance, as the first part's whenever the sample is not
    equidistant from the target.

    Returns
    -------
    (S1, S2)
        Far and near subsamples, each preserving original row order.
    """
    if not (0.0 < fraction < 1.0):
        raise DataError("fraction must lie strictly between 0 and 1")
    if target.dimension != data.p:
        raise DataError("target dimension does not match data inputs")
    n2 = math.ceil(fraction * data.n)
    if n2 >= data.n:
        raise DataError("fraction leaves no observations for the far part")
    box_dist = target.point_distance(data.inputs)
    center_dist = np.sqrt(((data.inputs - target.center) ** 2).sum(axis=1))
    order = np.lexsort((np.arange(data.n), center_dist, box_dist))
    near = np.sort(order[:n2])
    far = np.sort(order[n2:])
    return data.subset(far), data.subset(near)
