"""Post-processing of completed surfaces: KNN retention and density clustering."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInput, KTooLarge
from .geometry import PointCloud


@dataclass(frozen=True)
class PostprocConfig:
    k_retain: int = 5
    db_eps: float = 0.5
    db_min_pts: int = 5
    largest_only: bool = True

    def __post_init__(self):
        if self.k_retain < 1 or self.db_eps <= 0 or self.db_min_pts < 1:
            raise ValueError("invalid post-processing config")


def knn_retain_indices(generated, observed, k) -> np.ndarray:
    """Sorted unique indices of the ``k`` generated points nearest each observed point."""
    generated = np.asarray(generated, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if len(generated) == 0 or len(observed) == 0:
        raise EmptyInput("knn retention needs non-empty clouds")
    if k > len(generated):
        raise KTooLarge(f"k={k} exceeds {len(generated)} generated points")
    if k == len(generated):
        return np.arange(len(generated))
    _, idx = cKDTree(generated).query(observed, k=k)
    return np.unique(np.asarray(idx).ravel())


def knn_retain(generated: PointCloud, observed: PointCloud, k: int) -> PointCloud:
    return generated.with_points(generated.points[knn_retain_indices(generated.points, observed.points, k)])


def dbscan(points, eps, min_pts) -> np.ndarray:
    """Density clustering; returns a label per point, -1 for noise.

    A core point has at least ``min_pts`` neighbours within ``eps`` counting
    itself.  Clusters are grown breadth-first from cores in input-index order and
    numbered in order of discovery; a border point joins the first cluster that
    reaches it.
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    n = len(pts)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    nbrs = cKDTree(pts).query_ball_point(pts, r=eps, return_sorted=True)
    core = np.fromiter((len(nb) >= min_pts for nb in nbrs), dtype=bool, count=n)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for q in nbrs[j]:
                if labels[q] == -1:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return labels


@dataclass
class PostprocResult:
    cloud: PointCloud
    retained: np.ndarray  # indices into the generated cloud
    fallback: bool = False


def postprocess(generated: PointCloud, observed: PointCloud, cfg: PostprocConfig = PostprocConfig()) -> PostprocResult:
    """KNN retention, then keep the dominant DBSCAN cluster.

    Ties between equally large clusters go to the lowest label.  If clustering
    leaves nothing, the retained set is returned with ``fallback`` set.
    """
    k = min(cfg.k_retain, len(generated))
    kept = knn_retain_indices(generated.points, observed.points, k)
    labels = dbscan(generated.points[kept], cfg.db_eps, cfg.db_min_pts)
    valid = labels >= 0
    if not valid.any():
        return PostprocResult(generated.with_points(generated.points[kept]), kept, True)
    if cfg.largest_only:
        counts = np.bincount(labels[valid])
        sel = labels == int(np.argmax(counts))
    else:
        sel = valid
    idx = kept[sel]
    return PostprocResult(generated.with_points(generated.points[idx]), idx, False)
