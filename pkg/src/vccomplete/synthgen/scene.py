"""Scene manifests and single-viewpoint rendering of partial cars."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshNotFound
from ..geometry import Box3, PointCloud, RigidPose, rot_up
from .mesh import TriangleMesh
from .raycast import intersect_ground, intersect_mesh, intersect_pole


@dataclass(frozen=True)
class CarPlacement:
    mesh_id: str
    box: Box3  # world frame; the mesh bounds are stretched to fill it


@dataclass(frozen=True)
class Pole:
    x: float
    y: float
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("pole radius and height must be positive")


@dataclass(frozen=True)
class SceneManifest:
    cars: tuple[CarPlacement, ...]
    poles: tuple[Pole, ...] = ()
    sensor_origin: tuple[float, float, float] = (0.0, 0.0, 1.8)
    ground_z: float = 0.0
    bounds: float = 80.0  # |x|, |y| limit for placements

    def validate(self):
        for car in self.cars:
            if np.any(np.abs(car.box.center[:2]) > self.bounds):
                raise ValueError(f"car {car.mesh_id} outside scene bounds")
        for p in self.poles:
            if abs(p.x) > self.bounds or abs(p.y) > self.bounds:
                raise ValueError("pole outside scene bounds")

    def to_dict(self):
        return {
            "sensor_origin": [float(v) for v in self.sensor_origin],
            "ground_z": float(self.ground_z),
            "bounds": float(self.bounds),
            "cars": [
                {
                    "mesh_id": c.mesh_id,
                    "center": [float(v) for v in c.box.center],
                    "dims": [float(v) for v in c.box.dims],
                    "yaw": float(c.box.yaw),
                }
                for c in self.cars
            ],
            "poles": [
                {"x": float(p.x), "y": float(p.y), "radius": float(p.radius), "height": float(p.height)}
                for p in self.poles
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "SceneManifest":
        cars = tuple(CarPlacement(c["mesh_id"], Box3(c["center"], c["dims"], c["yaw"])) for c in d["cars"])
        poles = tuple(Pole(p["x"], p["y"], p["radius"], p["height"]) for p in d.get("poles", []))
        m = cls(cars, poles, tuple(d.get("sensor_origin", (0.0, 0.0, 1.8))), d.get("ground_z", 0.0),
                d.get("bounds", 80.0))
        m.validate()
        return m


def dump_manifest(manifest: SceneManifest) -> str:
    """Canonical text form; floats use shortest round-trip repr."""
    return json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"


def load_manifest(text: str) -> SceneManifest:
    return SceneManifest.from_dict(json.loads(text))


def write_manifest(path, manifest):
    Path(path).write_text(dump_manifest(manifest), encoding="utf-8")


def read_manifest(path):
    return load_manifest(Path(path).read_text(encoding="utf-8"))


def random_manifest(rng, mesh_dims: dict, n_cars=(3, 8), n_poles=(2, 6), range_m=(5.0, 60.0),
                    hfov_deg=(-180.0, 180.0), dim_scale=(0.9, 1.1), sensor_height=1.8, max_tries=200):
    """Randomized placements: uniform yaw, range and azimuth, jittered car size.

    Cars are kept apart by their footprint circles.  Half the poles are dropped on
    the sight line of a random car so that some cars are partly occluded.
    """
    ids = sorted(mesh_dims)
    want = int(rng.integers(n_cars[0], n_cars[1] + 1))
    cars, discs = [], []
    tries = 0
    while len(cars) < want and tries < max_tries:
        tries += 1
        mid = ids[int(rng.integers(len(ids)))]
        dims = np.asarray(mesh_dims[mid], float) * rng.uniform(*dim_scale)
        r = rng.uniform(*range_m)
        az = math.radians(rng.uniform(*hfov_deg))
        xy = np.array([r * math.cos(az), r * math.sin(az)])
        rad = 0.5 * math.hypot(dims[0], dims[1])
        if any(np.linalg.norm(xy - c) < rad + cr + 0.3 for c, cr in discs):
            continue
        discs.append((xy, rad))
        yaw = rng.uniform(-math.pi, math.pi)
        cars.append(CarPlacement(mid, Box3([xy[0], xy[1], dims[2] / 2.0], dims, yaw)))
    poles = []
    for i in range(int(rng.integers(n_poles[0], n_poles[1] + 1))):
        radius = rng.uniform(0.05, 0.3)
        height = rng.uniform(1.0, 4.0)
        if cars and i % 2 == 0:
            target = discs[int(rng.integers(len(discs)))]
            frac = rng.uniform(0.3, 0.8)
            lateral = rng.uniform(-1.0, 1.0)
            c = target[0] * frac
            perp = np.array([-c[1], c[0]]) / (np.linalg.norm(c) + 1e-12)
            x, y = c + lateral * perp
        else:
            r = rng.uniform(*range_m)
            az = math.radians(rng.uniform(*hfov_deg))
            x, y = r * math.cos(az), r * math.sin(az)
        if any(np.linalg.norm(np.array([x, y]) - c) < cr + radius for c, cr in discs):
            continue
        poles.append(Pole(float(x), float(y), float(radius), float(height)))
    return SceneManifest(tuple(cars), tuple(poles), (0.0, 0.0, float(sensor_height)))


@dataclass(frozen=True)
class RayGrid:
    """Spherical ray grid centred on the sensor; angles in degrees."""

    res_v: float = 0.05
    res_h: float = 0.05
    vfov: tuple[float, float] = (-25.0, 15.0)
    hfov: tuple[float, float] = (-180.0, 180.0)

    def elevations(self):
        n = int(math.floor((self.vfov[1] - self.vfov[0]) / self.res_v + 1e-9)) + 1
        return np.radians(self.vfov[0] + self.res_v * np.arange(n))

    def azimuths(self):
        span = self.hfov[1] - self.hfov[0]
        n = int(math.floor(span / self.res_h + 1e-9))
        if span < 360.0 - 1e-9:
            n += 1
        return np.radians(self.hfov[0] + self.res_h * np.arange(n))


@dataclass
class SampleRecord:
    partial: PointCloud  # P_vc
    complete: PointCloud  # G_vc
    gt_pose: RigidPose  # viewer -> canonical
    gt_box: Box3  # viewer frame
    mesh_id: str = ""
    meta: dict = field(default_factory=dict)


def placement_transform(mesh: TriangleMesh, box: Box3):
    """(scale, centre offset) that maps mesh bounds onto the box in canonical coordinates."""
    lo, hi = mesh.bounds()
    return box.dims / (hi - lo), (lo + hi) / 2.0


def to_canonical_placed(points, mesh: TriangleMesh, box: Box3):
    """Map points in the mesh's own frame to the placed car's canonical frame."""
    scale, mid = placement_transform(mesh, box)
    return (np.asarray(points) - mid) * scale


def placed_mesh(mesh: TriangleMesh, box: Box3, origin) -> TriangleMesh:
    """The mesh stretched into ``box`` and expressed relative to the sensor origin."""
    canon = TriangleMesh(to_canonical_placed(mesh.vertices, mesh, box), mesh.triangles)
    return canon.transformed(np.ones(3), rot_up(box.yaw), box.center - np.asarray(origin))


def _window_mask(box_vc: Box3, az, el, margin):
    """Grid rows/columns whose rays can reach the box (viewer frame)."""
    corners = box_vc.corners()
    c_az = math.atan2(box_vc.center[1], box_vc.center[0])
    caz = np.arctan2(corners[:, 1], corners[:, 0])
    d = np.angle(np.exp(1j * (caz - c_az)))  # wrapped to (-pi, pi]
    rho = np.linalg.norm(corners[:, :2], axis=1)
    cel = np.arctan2(corners[:, 2], rho)
    daz = np.angle(np.exp(1j * (az - c_az)))
    col = (daz >= d.min() - margin) & (daz <= d.max() + margin)
    row = (el >= cel.min() - margin) & (el <= cel.max() + margin)
    # sensor inside the footprint would need the full sphere; never happens for range >= 5 m
    return row, col


def render_scene(manifest: SceneManifest, meshes: dict, grid: RayGrid = RayGrid(),
                 include_ground=False, ground_margin=0.5) -> list[SampleRecord]:
    """Cast the spherical grid from the sensor and split car hits per car.

    Every ray is tested against all cars, poles and the ground; a car keeps the
    rays for which it is the first surface hit.  Points come out in grid order
    (elevation-major, then azimuth) and are expressed in the viewer frame
    (sensor origin at 0, world axes).  Cars with no hits are dropped.
    """
    for car in manifest.cars:
        if car.mesh_id not in meshes:
            raise MeshNotFound(car.mesh_id)
    origin = np.asarray(manifest.sensor_origin, dtype=np.float64)
    az, el = grid.azimuths(), grid.elevations()
    margin = math.radians(max(grid.res_h, grid.res_v))
    placed, boxes_vc = [], []
    for car in manifest.cars:
        placed.append(placed_mesh(meshes[car.mesh_id], car.box, origin))
        boxes_vc.append(Box3(car.box.center - origin, car.box.dims, car.box.yaw))
    ground_vc = manifest.ground_z - origin[2]
    zero = np.zeros(3)
    records = []
    for ci, car in enumerate(manifest.cars):
        row, col = _window_mask(boxes_vc[ci], az, el, margin)
        if not row.any() or not col.any():
            continue
        ee, aa = np.meshgrid(el[row], az[col], indexing="ij")
        ce = np.cos(ee).ravel()
        dirs = np.column_stack([ce * np.cos(aa).ravel(), ce * np.sin(aa).ravel(), np.sin(ee).ravel()])
        t_car, _ = intersect_mesh(placed[ci], zero, dirs)
        cand = np.isfinite(t_car)
        if not cand.any():
            continue
        d_c, t_c = dirs[cand], t_car[cand]
        blocked = np.zeros(len(d_c), dtype=bool)
        for cj, other in enumerate(placed):
            if cj != ci:
                t_o, _ = intersect_mesh(other, zero, d_c)
                blocked |= t_o < t_c
        for p in manifest.poles:
            t_p = intersect_pole(zero, d_c, p.x - origin[0], p.y - origin[1], p.radius, p.height, ground_vc)
            blocked |= t_p < t_c
        blocked |= intersect_ground(zero, d_c, ground_vc) < t_c
        keep = ~blocked
        pts = d_c[keep] * t_c[keep, None]
        if include_ground:
            t_g = intersect_ground(zero, dirs, ground_vc)
            g_ok = np.isfinite(t_g) & ~cand
            gp = dirs[g_ok] * t_g[g_ok, None]
            pts = np.vstack([pts, gp[boxes_vc[ci].contains(gp, margin=ground_margin)]])
        if len(pts) == 0:
            continue
        box = boxes_vc[ci]
        records.append(SampleRecord(
            partial=PointCloud(pts),
            complete=PointCloud(np.zeros((0, 3))),
            gt_pose=RigidPose.from_yaw(box.yaw, box.center),
            gt_box=box,
            mesh_id=car.mesh_id,
            meta={"car_index": ci},
        ))
    return records


def place_complete(canonical_surface: np.ndarray, mesh: TriangleMesh, box_vc: Box3) -> np.ndarray:
    """Stretch a mesh-frame surface sample into a viewer-frame placement."""
    canon = to_canonical_placed(canonical_surface, mesh, box_vc)
    return RigidPose.from_yaw(box_vc.yaw, box_vc.center).apply_inverse(canon)
