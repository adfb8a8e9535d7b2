"""ASCII PLY point clouds (x, y, z only) and per-sample record folders."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import Box3, PointCloud, RigidPose


class PlyError(ValueError):
    pass


def format_ply(points) -> str:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    head = f"ply\nformat ascii 1.0\nelement vertex {len(pts)}\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
    # repr keeps float64 values bit-exact on re-read
    body = "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist())
    return head + body


def write_ply(path, points):
    Path(path).write_text(format_ply(points), encoding="ascii")


def read_ply(path) -> np.ndarray:
    """Strict ascii reader; tolerates trailing whitespace and a trailing newline."""
    lines = Path(path).read_text(encoding="ascii").split("\n")
    it = iter(enumerate(lines, start=1))

    def nxt():
        for no, ln in it:
            return no, ln.rstrip()
        raise PlyError(f"{path}: unexpected end of file")

    no, ln = nxt()
    if ln != "ply":
        raise PlyError(f"{path}:{no}: missing 'ply' magic")
    no, ln = nxt()
    if ln != "format ascii 1.0":
        raise PlyError(f"{path}:{no}: only 'format ascii 1.0' is supported")
    n = None
    props = []
    while True:
        no, ln = nxt()
        parts = ln.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "element":
            if len(parts) != 3 or parts[1] != "vertex" or n is not None:
                raise PlyError(f"{path}:{no}: expected a single 'element vertex N'")
            try:
                n = int(parts[2])
            except ValueError:
                raise PlyError(f"{path}:{no}: bad vertex count") from None
        elif parts[0] == "property":
            if len(parts) != 3 or parts[1] not in ("float", "double", "float32", "float64"):
                raise PlyError(f"{path}:{no}: unsupported property {ln!r}")
            props.append(parts[2])
        elif parts[0] == "end_header":
            break
        else:
            raise PlyError(f"{path}:{no}: unexpected header line {ln!r}")
    if n is None or props != ["x", "y", "z"]:
        raise PlyError(f"{path}: header must declare element vertex with properties x, y, z")
    out = np.empty((n, 3))
    for i in range(n):
        no, ln = nxt()
        parts = ln.split()
        if len(parts) != 3:
            raise PlyError(f"{path}:{no}: expected 3 values, got {len(parts)}")
        try:
            out[i] = [float(p) for p in parts]
        except ValueError:
            raise PlyError(f"{path}:{no}: non-numeric value") from None
    for no, ln in it:
        if ln.strip():
            raise PlyError(f"{path}:{no}: trailing data after {n} vertices")
    return out


def write_record(folder, record, extra_partials: dict | None = None):
    """One folder per sample: partial.ply, complete.ply, label.json."""
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    write_ply(folder / "partial.ply", record.partial.points)
    write_ply(folder / "complete.ply", record.complete.points)
    for name, pts in (extra_partials or {}).items():
        write_ply(folder / f"{name}.ply", pts)
    label = {
        "mesh_id": record.mesh_id,
        "pose": {
            "rotation": [float(v) for v in record.gt_pose.rotation.ravel()],
            "translation": [float(v) for v in record.gt_pose.translation],
        },
        "box": {
            "center": [float(v) for v in record.gt_box.center],
            "dims": [float(v) for v in record.gt_box.dims],
            "yaw": float(record.gt_box.yaw),
        },
        "meta": record.meta,
    }
    (folder / "label.json").write_text(json.dumps(label, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_record(folder, partial_name="partial"):
    from .synthgen.scene import SampleRecord

    folder = Path(folder)
    label = json.loads((folder / "label.json").read_text(encoding="utf-8"))
    pose = RigidPose(np.array(label["pose"]["rotation"]).reshape(3, 3), label["pose"]["translation"])
    box = Box3(label["box"]["center"], label["box"]["dims"], label["box"]["yaw"])
    return SampleRecord(
        partial=PointCloud(read_ply(folder / f"{partial_name}.ply")),
        complete=PointCloud(read_ply(folder / "complete.ply")),
        gt_pose=pose,
        gt_box=box,
        mesh_id=label["mesh_id"],
        meta=label.get("meta", {}),
    )
