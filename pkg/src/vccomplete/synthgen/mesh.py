"""Triangle meshes: a strict ``v``/``f`` text reader/writer and procedural cars."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import MeshFormatError

AREA_EPS = 1e-12


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64, 0-based

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def corners(self):
        """Triangle corner arrays (a, b, c), each (T, 3)."""
        tv = self.vertices[self.triangles]
        return tv[:, 0], tv[:, 1], tv[:, 2]

    def areas(self):
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def drop_degenerate(self) -> "TriangleMesh":
        keep = self.areas() > AREA_EPS
        return TriangleMesh(self.vertices, self.triangles[keep])

    def transformed(self, scale, rotation, translation) -> "TriangleMesh":
        """Per-axis ``scale``, then row-vector ``rotation``, then ``translation``."""
        v = (self.vertices * np.asarray(scale)) @ np.asarray(rotation) + np.asarray(translation)
        return TriangleMesh(v, self.triangles)


def read_mesh(path) -> TriangleMesh:
    """Parse ``v x y z`` / ``f i j k`` lines (1-based indices).

    Blank lines and ``#`` comments are skipped; anything else is an error that
    names the file and line.  Zero-area triangles are dropped after loading.
    """
    verts, faces, face_lines = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag, rest = parts[0], parts[1:]
            if tag == "v":
                if len(rest) != 3:
                    raise MeshFormatError(path, line_no, f"vertex needs 3 coordinates, got {len(rest)}")
                try:
                    xyz = [float(p) for p in rest]
                except ValueError:
                    raise MeshFormatError(path, line_no, f"bad vertex coordinate in {line!r}") from None
                if not np.all(np.isfinite(xyz)):
                    raise MeshFormatError(path, line_no, "non-finite vertex coordinate")
                verts.append(xyz)
            elif tag == "f":
                if len(rest) != 3:
                    raise MeshFormatError(path, line_no, f"face needs 3 indices, got {len(rest)}")
                try:
                    ijk = [int(p) for p in rest]
                except ValueError:
                    raise MeshFormatError(path, line_no, f"bad face index in {line!r}") from None
                faces.append(ijk)
                face_lines.append(line_no)
            else:
                raise MeshFormatError(path, line_no, f"unknown record {tag!r}")
    n = len(verts)
    for ijk, line_no in zip(faces, face_lines):
        for i in ijk:
            if i < 1 or i > n:
                raise MeshFormatError(path, line_no, f"face index {i} out of range 1..{n}")
    if not faces:
        raise MeshFormatError(path, 0, "mesh has no faces")
    mesh = TriangleMesh(np.array(verts), np.array(faces) - 1).drop_degenerate()
    if len(mesh.triangles) == 0:
        raise MeshFormatError(path, 0, "mesh has only degenerate faces")
    return mesh


def write_mesh(path, mesh: TriangleMesh):
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def box_mesh(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> TriangleMesh:
    """Closed axis-aligned box with outward-wound faces."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    v = np.array([[hi[0] if i & 1 else lo[0], hi[1] if i & 2 else lo[1], hi[2] if i & 4 else lo[2]]
                  for i in range(8)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(tris))


def sphere_mesh(radius=1.0, n_lat=16, n_lon=32) -> TriangleMesh:
    verts = [[0.0, 0.0, radius]]
    for i in range(1, n_lat):
        phi = np.pi * i / n_lat
        for j in range(n_lon):
            lam = 2 * np.pi * j / n_lon
            verts.append([radius * np.sin(phi) * np.cos(lam), radius * np.sin(phi) * np.sin(lam), radius * np.cos(phi)])
    verts.append([0.0, 0.0, -radius])
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append((0, ring(1, j), ring(1, j + 1)))
        tris.append((south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b, c, d = ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j)
            tris += [(a, d, c), (a, c, b)]
    return TriangleMesh(np.array(verts), np.array(tris))


def car_mesh(rng: np.random.Generator) -> TriangleMesh:
    """A closed, car-like solid with randomized proportions.

    The side silhouette (bumper, hood, windscreen, roof, rear screen, boot) is
    extruded across the width, with the greenhouse narrower than the body.
    Canonical frame: +x forward, +z up, ground contact at z = 0, centred in x/y.
    """
    length = rng.uniform(3.8, 5.2)
    width = rng.uniform(1.65, 2.0)
    height = rng.uniform(1.35, 1.8)
    clearance = rng.uniform(0.12, 0.22)
    belt = height * rng.uniform(0.52, 0.62)
    hood_len = length * rng.uniform(0.22, 0.32)
    boot_len = length * rng.uniform(0.10, 0.25)
    screen = length * rng.uniform(0.12, 0.18)
    rear_screen = length * rng.uniform(0.08, 0.20)
    taper = rng.uniform(0.78, 0.9)
    hl = length / 2.0
    # (x, z, half-width), traced around the silhouette
    prof = [
        (hl, clearance, 1.0),
        (hl, belt * 0.85, 1.0),
        (hl - 0.1 * hood_len, belt, 1.0),
        (hl - hood_len, belt * 1.02, 1.0),
        (hl - hood_len - screen, height, taper),
        (-hl + boot_len + rear_screen, height, taper),
        (-hl + boot_len, belt * 1.04, 1.0),
        (-hl, belt * 0.95, 1.0),
        (-hl, clearance, 1.0),
        (-hl * 0.6, 0.0, 1.0),
        (hl * 0.6, 0.0, 1.0),
    ]
    hw = width / 2.0
    n = len(prof)
    verts = []
    for side in (1.0, -1.0):
        for x, z, w in prof:
            verts.append([x, side * hw * w, z])
    cx = float(np.mean([p[0] for p in prof]))
    cz = belt * 0.55
    verts.append([cx, hw, cz])
    verts.append([cx, -hw, cz])
    left_c, right_c = 2 * n, 2 * n + 1
    tris = []
    for i in range(n):
        j = (i + 1) % n
        # side fans, wound outward
        tris.append((left_c, j, i))
        tris.append((right_c, n + i, n + j))
        # perimeter band
        tris.append((i, j, n + j))
        tris.append((i, n + j, n + i))
    mesh = TriangleMesh(np.array(verts), np.array(tris)).drop_degenerate()
    lo, hi = mesh.bounds()
    shift = np.array([-(lo[0] + hi[0]) / 2.0, -(lo[1] + hi[1]) / 2.0, -lo[2]])
    return TriangleMesh(mesh.vertices + shift, mesh.triangles)
