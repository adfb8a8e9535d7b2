"""Ray casting against triangle meshes, vertical poles and a ground plane."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

EPS = 1e-12
RAY_CHUNK = 2048


def _ray_aabb(origins, dirs, lo, hi):
    """Boolean mask of rays that touch the box [lo, hi] at t >= 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - origins) * inv
        t1 = (hi - origins) * inv
    tmin = np.nanmax(np.minimum(t0, t1), axis=1)
    tmax = np.nanmin(np.maximum(t0, t1), axis=1)
    return (tmax >= np.maximum(tmin, 0.0))


def intersect_mesh(mesh: TriangleMesh, origins, dirs, aabb_reject=True):
    """Nearest Moller-Trumbore hit distance per ray.

    Args:
        mesh: triangles to test (both faces count).
        origins: (R, 3) or (3,) ray origins.
        dirs: (R, 3) unit directions.
        aabb_reject: skip rays that miss the mesh bounding box.

    Returns:
        (t, tri): hit distances (inf on miss) and triangle indices (-1 on miss).
        Equal distances resolve to the lowest triangle index.
    """
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(origins, dtype=np.float64), dirs.shape)
    n = len(dirs)
    t_best = np.full(n, np.inf)
    tri_best = np.full(n, -1, dtype=np.int64)
    if n == 0 or len(mesh.triangles) == 0:
        return t_best, tri_best
    a, b, c = mesh.corners()
    e1, e2 = b - a, c - a
    active = np.arange(n)
    if aabb_reject:
        lo, hi = mesh.bounds()
        pad = 1e-9 * max(1.0, float(np.abs(np.concatenate([lo, hi])).max()))
        active = active[_ray_aabb(origins, dirs, lo - pad, hi + pad)]
    for start in range(0, len(active), RAY_CHUNK):
        idx = active[start:start + RAY_CHUNK]
        o, d = origins[idx], dirs[idx]
        p = np.cross(d[:, None, :], e2[None, :, :])  # (r, T, 3)
        det = np.einsum("tk,rtk->rt", e1, p)
        ok = np.abs(det) > EPS
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = o[:, None, :] - a[None, :, :]
        u = np.einsum("rtk,rtk->rt", s, p) * inv
        q = np.cross(s, e1[None, :, :])
        v = np.einsum("rk,rtk->rt", d, q) * inv
        t = np.einsum("tk,rtk->rt", e2, q) * inv
        hit = ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > EPS)
        t = np.where(hit, t, np.inf)
        k = np.argmin(t, axis=1)
        tk = t[np.arange(len(idx)), k]
        t_best[idx] = tk
        tri_best[idx] = np.where(np.isfinite(tk), k, -1)
    return t_best, tri_best


def raycast(mesh: TriangleMesh, origin, directions):
    """Nearest hit point for each ray from ``origin``.

    Returns:
        (points, hit): (R, 3) hit points (NaN rows for misses) and the hit mask.
    """
    d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    o = np.asarray(origin, dtype=np.float64)
    t, _ = intersect_mesh(mesh, o, d)
    hit = np.isfinite(t)
    pts = np.full(d.shape, np.nan)
    pts[hit] = np.broadcast_to(o, d.shape)[hit] + t[hit, None] * d[hit]
    return pts, hit


def intersect_pole(origins, dirs, x, y, radius, height, ground_z=0.0):
    """Hit distance against a capped vertical cylinder standing on the ground."""
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(origins, dtype=np.float64), dirs.shape)
    ox, oy = origins[:, 0] - x, origins[:, 1] - y
    dx, dy = dirs[:, 0], dirs[:, 1]
    A = dx * dx + dy * dy
    B = 2.0 * (ox * dx + oy * dy)
    C = ox * ox + oy * oy - radius * radius
    disc = B * B - 4.0 * A * C
    t_side = np.full(len(dirs), np.inf)
    ok = (A > EPS) & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    A_safe = np.where(ok, A, 1.0)
    for t in ((-B - sq) / (2.0 * A_safe), (-B + sq) / (2.0 * A_safe)):
        z = origins[:, 2] + t * dirs[:, 2]
        good = ok & (t > EPS) & (z >= ground_z) & (z <= ground_z + height) & (t < t_side)
        t_side = np.where(good, t, t_side)
    top = ground_z + height
    with np.errstate(divide="ignore", invalid="ignore"):
        t_cap = (top - origins[:, 2]) / dirs[:, 2]
        px = ox + t_cap * dx
        py = oy + t_cap * dy
    cap_ok = np.isfinite(t_cap) & (t_cap > EPS) & (px * px + py * py <= radius * radius)
    return np.minimum(t_side, np.where(cap_ok, t_cap, np.inf))


def intersect_ground(origins, dirs, ground_z=0.0):
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(origins, dtype=np.float64), dirs.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ground_z - origins[:, 2]) / dirs[:, 2]
    return np.where(np.isfinite(t) & (t > EPS), t, np.inf)


def point_mesh_distance(points, mesh: TriangleMesh) -> np.ndarray:
    """Exact unsigned distance from each point to the closest triangle (brute force)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    a, b, c = mesh.corners()
    out = np.empty(len(pts))
    for i in range(0, len(pts), 256):
        p = pts[i:i + 256, None, :]
        out[i:i + 256] = np.sqrt(_closest_sq(p, a[None], b[None], c[None]).min(axis=1))
    return out


def _closest_sq(p, a, b, c):
    # Ericson, Real-Time Collision Detection, closest point on triangle
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.sum(ab * ap, -1)
    d2 = np.sum(ac * ap, -1)
    bp = p - b
    d3 = np.sum(ab * bp, -1)
    d4 = np.sum(ac * bp, -1)
    cp = p - c
    d5 = np.sum(ab * cp, -1)
    d6 = np.sum(ac * cp, -1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        closest = a + ab * v[..., None] + ac * w[..., None]
        # vertex regions
        closest = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, closest)
        closest = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, closest)
        closest = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, closest)
        # edge regions
        t_ab = np.clip(d1 / (d1 - d3), 0, 1)
        on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        closest = np.where(on_ab[..., None], a + ab * t_ab[..., None], closest)
        t_ac = np.clip(d2 / (d2 - d6), 0, 1)
        on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        closest = np.where(on_ac[..., None], a + ac * t_ac[..., None], closest)
        t_bc = np.clip((d4 - d3) / ((d4 - d3) + (d5 - d6)), 0, 1)
        on_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        closest = np.where(on_bc[..., None], b + (c - b) * t_bc[..., None], closest)
    diff = p - closest
    return np.sum(diff * diff, -1)
