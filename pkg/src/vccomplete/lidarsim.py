"""Scan-pattern simulation: elevation rings and stride subsampling of dense partials."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, EmptySelection, OriginPoint
from .geometry import PointCloud

DEFAULT_BINS = (32, 64, 128, 256)
DEFAULT_RING_STRIDES = (1, 2, 4)
DEFAULT_POINT_STRIDES = (1, 2, 4)


@dataclass(frozen=True)
class ScanPattern:
    n_bins: int = 64
    ring_stride: int = 1
    point_stride: int = 1
    vfov: tuple[float, float] = (-25.0, 15.0)  # degrees

    def __post_init__(self):
        if self.n_bins < 1 or self.ring_stride < 1 or self.point_stride < 1:
            raise ValueError("n_bins and strides must be >= 1")
        if not self.vfov[0] < self.vfov[1]:
            raise ValueError("vfov min must be below max")

    @property
    def bin_width(self) -> float:
        return math.radians(self.vfov[1] - self.vfov[0]) / self.n_bins


def to_spherical(points) -> np.ndarray:
    """(r, azimuth, elevation) per point; azimuth via atan2, elevation = asin(z / r)."""
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    r = np.linalg.norm(p, axis=1)
    if np.any(r == 0.0):
        raise OriginPoint("cannot convert the origin to spherical coordinates")
    out = np.column_stack([r, np.arctan2(p[:, 1], p[:, 0]), np.arcsin(np.clip(p[:, 2] / r, -1.0, 1.0))])
    return out[0] if single else out


def assign_rings(points, pattern: ScanPattern, return_flags=False):
    """Elevation bin of each point; out-of-range elevations clamp to the edge bins.

    With ``return_flags`` also returns a mask of the clamped points.
    """
    pts = points.points if isinstance(points, PointCloud) else points
    phi = np.degrees(to_spherical(pts)[:, 2]) if len(pts) else np.zeros(0)
    lo, hi = pattern.vfov
    # binning in degrees keeps round configurations (e.g. 0 deg at 15/64-deg bins) exact
    raw = np.floor((phi - lo) / ((hi - lo) / pattern.n_bins)).astype(np.int64)
    rings = np.clip(raw, 0, pattern.n_bins - 1)
    if return_flags:
        return rings, (phi < lo) | (phi > hi)
    return rings


def subsample(cloud: PointCloud, pattern: ScanPattern, rng_seed, ring_offset=None, point_offset=None) -> PointCloud:
    """Keep every ``ring_stride``-th ring and every ``point_stride``-th point in it.

    Offsets are drawn from ``rng_seed`` unless given.  Points within a ring are
    ordered by azimuth (stable for ties) before striding, and the output is in
    (ring, azimuth) order.  The point offset is drawn once per cloud.
    """
    if len(cloud) == 0:
        raise EmptyInput("cannot subsample an empty cloud")
    rng = np.random.default_rng(rng_seed)
    r_off = int(rng.integers(pattern.ring_stride)) if ring_offset is None else int(ring_offset)
    p_off = int(rng.integers(pattern.point_stride)) if point_offset is None else int(point_offset)
    rings = assign_rings(cloud.points, pattern)
    az = np.arctan2(cloud.points[:, 1], cloud.points[:, 0])
    order = np.lexsort((az, rings))
    rings_sorted = rings[order]
    keep_ring = (rings_sorted - r_off) % pattern.ring_stride == 0
    # rank of each point inside its ring
    starts = np.searchsorted(rings_sorted, rings_sorted, side="left")
    rank = np.arange(len(order)) - starts
    keep = keep_ring & ((rank - p_off) % pattern.point_stride == 0)
    if not keep.any():
        raise EmptySelection("no point survived subsampling")
    return cloud.with_points(cloud.points[order[keep]])


def draw_pattern(rng, bins=DEFAULT_BINS, ring_strides=DEFAULT_RING_STRIDES, point_strides=DEFAULT_POINT_STRIDES,
                 vfov=(-25.0, 15.0)) -> ScanPattern:
    return ScanPattern(
        n_bins=int(bins[int(rng.integers(len(bins)))]),
        ring_stride=int(ring_strides[int(rng.integers(len(ring_strides)))]),
        point_stride=int(point_strides[int(rng.integers(len(point_strides)))]),
        vfov=tuple(vfov),
    )


def simulate(cloud: PointCloud, master_seed: int, index: int, max_tries: int = 8, **pattern_sets):
    """Draw a pattern for sample ``index`` and subsample; retries on empty selection.

    Returns (cloud, pattern).  Raises EmptySelection if every attempt is empty.
    """
    for attempt in range(max_tries):
        rng = np.random.default_rng([int(master_seed), int(index), attempt])
        pattern = draw_pattern(rng, **pattern_sets)
        try:
            return subsample(cloud, pattern, rng), pattern
        except EmptySelection:
            continue
    raise EmptySelection(f"sample {index}: no pattern kept any point in {max_tries} attempts")
