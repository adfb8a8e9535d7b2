"""Farthest point sampling and multi-view complete-surface extraction."""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import InsufficientHits, KTooLarge
from ..geometry import PointCloud
from .mesh import TriangleMesh
from .raycast import intersect_mesh


def farthest_point_indices(points, k, seed_index=0):
    """Greedy max-min selection starting from ``seed_index``.

    Ties go to the lowest point index, so the result is fully deterministic.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} points")
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    x, y, z = (np.ascontiguousarray(pts[:, i]) for i in range(3))
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = seed_index
    dist = (x - x[seed_index]) ** 2 + (y - y[seed_index]) ** 2 + (z - z[seed_index]) ** 2
    d, tmp = np.empty_like(dist), np.empty_like(dist)
    for i in range(1, k):
        j = int(dist.argmax())  # first maximum -> lowest index on ties
        chosen[i] = j
        # in-place squared distance to the new pick
        np.subtract(x, x[j], out=d)
        np.multiply(d, d, out=d)
        np.subtract(y, y[j], out=tmp)
        np.multiply(tmp, tmp, out=tmp)
        d += tmp
        np.subtract(z, z[j], out=tmp)
        np.multiply(tmp, tmp, out=tmp)
        d += tmp
        np.minimum(dist, d, out=dist)
    return chosen


def farthest_point_sample(cloud: PointCloud, k: int, seed_index: int = 0) -> PointCloud:
    return cloud.with_points(cloud.points[farthest_point_indices(cloud.points, k, seed_index)])


def view_directions(n_views: int) -> np.ndarray:
    """Unit directions around an object.

    6, 18 and 26 give the cube face / face+edge / face+edge+corner sets;
    other counts use a Fibonacci sphere.
    """
    if n_views in (6, 14, 18, 26):
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)]
        order = {1: 0, 2: 1, 3: 2}
        want = {6: (1,), 14: (1, 3), 18: (1, 2), 26: (1, 2, 3)}[n_views]
        dirs = [d for d in dirs if sum(map(abs, d)) in want]
        dirs.sort(key=lambda d: (order[sum(map(abs, d))], d))
        arr = np.array(dirs, dtype=np.float64)
        return arr / np.linalg.norm(arr, axis=1, keepdims=True)
    i = np.arange(n_views) + 0.5
    z = 1.0 - 2.0 * i / n_views
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def orthographic_rays(center, radius, view, grid):
    """Parallel rays on a ``grid`` x ``grid`` lattice looking along ``-view``."""
    view = np.asarray(view, dtype=np.float64)
    helper = np.array([0.0, 0.0, 1.0]) if abs(view[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(view, helper)
    u /= np.linalg.norm(u)
    w = np.cross(view, u)
    # cell-centred offsets keep rays off the silhouette of axis-aligned faces
    s = (np.arange(grid) + 0.5) / grid * 2.0 - 1.0
    su, sw = np.meshgrid(s * radius, s * radius, indexing="ij")
    origins = (np.asarray(center) + 2.0 * radius * view) + su.reshape(-1, 1) * u + sw.reshape(-1, 1) * w
    dirs = np.broadcast_to(-view, origins.shape)
    return origins, np.ascontiguousarray(dirs)


def surface_hits(mesh: TriangleMesh, n_views=26, grid=64) -> np.ndarray:
    """Concatenated first-hit points of orthographic renders from each view."""
    lo, hi = mesh.bounds()
    center = (lo + hi) / 2.0
    radius = 0.5 * float(np.linalg.norm(hi - lo)) * 1.01 + 1e-9
    chunks = []
    for view in view_directions(n_views):
        o, d = orthographic_rays(center, radius, view, grid)
        t, _ = intersect_mesh(mesh, o, d)
        hit = np.isfinite(t)
        chunks.append(o[hit] + t[hit, None] * d[hit])
    return np.concatenate(chunks, axis=0)


def complete_surface(mesh: TriangleMesh, n_views: int = 26, n_points: int = 16384, grid: int = 64) -> PointCloud:
    """Multi-view raycast the whole surface, then FPS down to ``n_points``."""
    if n_views < 6:
        raise ValueError("n_views must be at least 6")
    hits = surface_hits(mesh, n_views, grid)
    if len(hits) < n_points:
        raise InsufficientHits(f"{len(hits)} surface hits < {n_points} requested")
    return PointCloud(hits[farthest_point_indices(hits, n_points, 0)])
