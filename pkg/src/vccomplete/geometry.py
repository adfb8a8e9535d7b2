"""Coordinate frames, rotations, boxes and box overlap.

Convention: points are row vectors and rotations multiply on the right,
``p' = p @ R``.  ``rot_up(a)`` is the row-vector matrix that turns a point
counter-clockwise by ``a`` about the sensor's up (z) axis, so
``p @ rot_up(-theta)`` removes an azimuth ``theta``.

A :class:`RigidPose` ``(R, t)`` maps a source frame to a target frame as
``x_target = (x_source - t) @ R``; its inverse is ``x_source = x_target @ R.T + t``.
For the viewer->canonical pose of an object, ``t`` is the object centre in the
viewer frame and ``R[:, 0]`` is the object's forward axis seen from the viewer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBox, DegenerateSixD, EmptyInput, FrameMismatch

ORTHO_TOL = 1e-6
SIXD_EPS = 1e-8
MIN_EXTENT = 1e-6


class Frame(enum.Enum):
    VIEWER_CENTRED = "viewer_centred"
    FRUSTUM = "frustum"
    FRUSTUM_MEAN = "frustum_mean"
    CANONICAL = "canonical"


@dataclass(frozen=True)
class PointCloud:
    """An (M, 3) array of points in metres, tagged with its coordinate frame."""

    points: np.ndarray
    frame: Frame = Frame.VIEWER_CENTRED

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (M, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def with_points(self, points, frame: Frame | None = None) -> "PointCloud":
        return PointCloud(points, self.frame if frame is None else frame)


def _require(cloud: PointCloud, frame: Frame):
    if cloud.frame is not frame:
        raise FrameMismatch(f"expected a {frame.value} cloud, got {cloud.frame.value}")


def _require_points(cloud: PointCloud):
    if len(cloud) == 0:
        raise EmptyInput("point cloud is empty")


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def rot_up(angle: float) -> np.ndarray:
    """Row-vector rotation by ``angle`` about the up axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(m: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    return bool(np.abs(m.T @ m - np.eye(3)).max() <= tol and abs(np.linalg.det(m) - 1.0) <= tol)


@dataclass(frozen=True)
class RigidPose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_yaw(cls, yaw: float, center) -> "RigidPose":
        """Viewer->canonical pose of an object at ``center`` heading ``yaw``."""
        return cls(rot_up(-yaw), center)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - self.translation) @ self.rotation

    def apply_inverse(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidPose":
        # x_src = x_tgt @ R.T + t  ==  (x_tgt - (-t @ R)) @ R.T
        return RigidPose(self.rotation.T, -self.translation @ self.rotation)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """Pose applying ``self`` first, then ``other``."""
        r = self.rotation @ other.rotation
        t = self.translation + other.translation @ self.rotation.T
        return RigidPose(r, t)

    def yaw(self) -> float:
        """Heading of the target frame's x axis, measured in the source frame."""
        return wrap_angle(math.atan2(self.rotation[1, 0], self.rotation[0, 0]))

    def is_valid(self) -> bool:
        return is_rotation(self.rotation) and bool(np.all(np.isfinite(self.translation)))


@dataclass(frozen=True)
class Box3:
    """Oriented box: centre, (length, width, height) and yaw about the up axis."""

    center: np.ndarray
    dims: np.ndarray
    yaw: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        d = np.asarray(self.dims, dtype=np.float64).reshape(3)
        if np.any(d <= 0):
            raise ValueError(f"box dims must be positive, got {d}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dims", d)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def corners_bev(self) -> np.ndarray:
        """Footprint corners, counter-clockwise, shape (4, 2)."""
        hl, hw = self.dims[0] / 2.0, self.dims[1] / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, s], [-s, c]])
        return local @ rot + self.center[:2]

    def corners(self) -> np.ndarray:
        bev = self.corners_bev()
        z0 = self.center[2] - self.dims[2] / 2.0
        z1 = self.center[2] + self.dims[2] / 2.0
        return np.vstack([np.column_stack([bev, np.full(4, z0)]), np.column_stack([bev, np.full(4, z1)])])

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        local = (np.asarray(points) - self.center) @ rot_up(-self.yaw)
        return np.all(np.abs(local) <= self.dims / 2.0 + margin, axis=1)

    def volume(self) -> float:
        return float(np.prod(self.dims))


# ---------------------------------------------------------------- frame chain


def frustum_angle(cloud: PointCloud) -> float:
    """Azimuth of the cloud's centroid, in (-pi, pi]."""
    _require(cloud, Frame.VIEWER_CENTRED)
    _require_points(cloud)
    m = cloud.mean()
    return wrap_angle(math.atan2(m[1], m[0]))


def rotate_about_up(cloud: PointCloud, angle: float) -> PointCloud:
    """Remove azimuth ``angle``: ``P_f = P_vc @ rot_up(-angle)``."""
    _require(cloud, Frame.VIEWER_CENTRED)
    _require_points(cloud)
    return cloud.with_points(cloud.points @ rot_up(-angle), Frame.FRUSTUM)


def mean_center(cloud: PointCloud) -> tuple[PointCloud, np.ndarray]:
    _require(cloud, Frame.FRUSTUM)
    _require_points(cloud)
    centroid = cloud.mean()
    return cloud.with_points(cloud.points - centroid, Frame.FRUSTUM_MEAN), centroid


def rot6d_to_matrix(v) -> np.ndarray:
    """Gram-Schmidt a 6-vector into a rotation whose first two columns follow it."""
    v = np.asarray(v, dtype=np.float64).reshape(6)
    a1, a2 = v[:3], v[3:]
    n1 = np.linalg.norm(a1)
    if n1 <= SIXD_EPS:
        raise DegenerateSixD("first 3-vector has (near) zero norm")
    b1 = a1 / n1
    u = a2 - (b1 @ a2) * b1
    n2 = np.linalg.norm(u)
    if n2 <= SIXD_EPS:
        raise DegenerateSixD("second 3-vector is (near) parallel to the first")
    b2 = u / n2
    return np.column_stack([b1, b2, np.cross(b1, b2)])


def canonicalize(cloud: PointCloud, pose: RigidPose) -> PointCloud:
    """Frustum -> canonical: ``(P_f - t) @ R`` with ``pose = (R_f->cn, t_f->cn)``."""
    _require(cloud, Frame.FRUSTUM)
    return cloud.with_points(pose.apply(cloud.points), Frame.CANONICAL)


def decanonicalize(cloud: PointCloud, pose: RigidPose, theta_f: float) -> PointCloud:
    """Canonical -> viewer: ``(S_cn @ R.T + t) @ rot_up(theta_f)``.

    ``R.T`` is the frustum-side rotation, so this exactly inverts
    ``canonicalize(rotate_about_up(., theta_f), pose)``.
    """
    _require(cloud, Frame.CANONICAL)
    frustum = pose.apply_inverse(cloud.points)
    return cloud.with_points(frustum @ rot_up(theta_f), Frame.VIEWER_CENTRED)


def viewer_pose(frustum_pose: RigidPose, theta_f: float) -> RigidPose:
    """Compose the frustum rotation with a frustum->canonical pose."""
    return RigidPose(rot_up(-theta_f), np.zeros(3)).compose(frustum_pose)


def box_from_canonical(cloud: PointCloud, strict: bool = True) -> Box3:
    """Axis-aligned bounds of a canonical-frame cloud as a zero-yaw box.

    With ``strict`` a box thinner than ``MIN_EXTENT`` on any axis raises
    :class:`DegenerateBox`; otherwise the extent is clamped and the box is
    returned with ``degenerate=True``.
    """
    _require(cloud, Frame.CANONICAL)
    _require_points(cloud)
    lo, hi = cloud.points.min(axis=0), cloud.points.max(axis=0)
    dims = hi - lo
    degenerate = bool(np.any(dims < MIN_EXTENT))
    if degenerate and strict:
        raise DegenerateBox(f"extent {dims} below {MIN_EXTENT} m")
    return Box3((lo + hi) / 2.0, np.maximum(dims, MIN_EXTENT), 0.0, degenerate)


def box_to_viewer(box: Box3, pose: RigidPose) -> Box3:
    """Express a canonical-frame box in the viewer frame of ``pose``.

    Only heading is carried over; any roll/pitch in the pose is dropped.
    """
    center = pose.apply_inverse(box.center[None, :])[0]
    return Box3(center, box.dims, wrap_angle(box.yaw + pose.yaw()), box.degenerate)


# ---------------------------------------------------------------- overlap


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW polygon ``clip``."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inp, output = output, []
        prev = inp[-1]
        s_prev = side(prev)
        for cur in inp:
            s_cur = side(cur)
            if s_cur >= 0:
                if s_prev < 0:
                    output.append(_intersect(prev, cur, s_prev, s_cur))
                output.append(cur)
            elif s_prev >= 0:
                output.append(_intersect(prev, cur, s_prev, s_cur))
            prev, s_prev = cur, s_cur
    return np.array(output, dtype=np.float64).reshape(-1, 2)


def _intersect(p, q, sp, sq):
    a = sp / (sp - sq)
    return (p[0] + a * (q[0] - p[0]), p[1] + a * (q[1] - p[1]))


def bev_intersection_area(a: Box3, b: Box3) -> float:
    return polygon_area(clip_polygon(a.corners_bev(), b.corners_bev()))


def iou_bev(a: Box3, b: Box3) -> float:
    pa, pb = a.corners_bev(), b.corners_bev()
    inter = polygon_area(clip_polygon(pa, pb))
    # footprint areas from the same corner arrays keep identical boxes at exactly 1
    union = polygon_area(pa) + polygon_area(pb) - inter
    return float(np.clip(inter / union, 0.0, 1.0)) if union > 0 else 0.0


def iou_3d(a: Box3, b: Box3) -> float:
    za = (a.center[2] - a.dims[2] / 2.0, a.center[2] + a.dims[2] / 2.0)
    zb = (b.center[2] - b.dims[2] / 2.0, b.center[2] + b.dims[2] / 2.0)
    dz = max(0.0, min(za[1], zb[1]) - max(za[0], zb[0]))
    pa, pb = a.corners_bev(), b.corners_bev()
    inter = polygon_area(clip_polygon(pa, pb)) * dz
    union = polygon_area(pa) * a.dims[2] + polygon_area(pb) * b.dims[2] - inter
    return float(np.clip(inter / union, 0.0, 1.0)) if union > 0 else 0.0
