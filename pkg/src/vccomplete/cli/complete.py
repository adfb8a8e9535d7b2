"""Augment a scene cloud: replace each masked object with its post-processed completion."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import EmptyInput, EmptySelection, KTooLarge
from ..geometry import PointCloud
from ..plyio import read_ply, write_ply
from ..postproc import PostprocConfig, dbscan, postprocess
from ..vcn.network import VcnNet
from ..vcn.pipeline import run_vcn_vc
from .config import RunConfig
from .train import load_net


class MaskError(ValueError):
    pass


def read_masks(path, n_points: int):
    """Masks file: ``{"objects": [{"name": str, "indices": [int, ...]}, ...]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    objects = data.get("objects") if isinstance(data, dict) else None
    if not isinstance(objects, list):
        raise MaskError(f"{path}: expected an 'objects' list")
    masks = []
    for i, obj in enumerate(objects):
        name = str(obj.get("name", f"object_{i}")) if isinstance(obj, dict) else f"object_{i}"
        idx = obj.get("indices") if isinstance(obj, dict) else None
        if not isinstance(idx, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in idx):
            raise MaskError(f"mask {name!r}: indices must be a list of integers")
        bad = [j for j in idx if j < 0 or j >= n_points]
        if bad:
            raise MaskError(f"mask {name!r}: indices {bad[:5]} out of range for {n_points} points")
        masks.append((name, np.unique(np.asarray(idx, dtype=np.int64))))
    return masks


def dominant_cluster(points, pcfg: PostprocConfig):
    """Largest DBSCAN cluster (lowest label on ties); all points if everything is noise."""
    labels = dbscan(points, pcfg.db_eps, pcfg.db_min_pts)
    valid = labels >= 0
    if not valid.any():
        return points
    return points[labels == int(np.argmax(np.bincount(labels[valid])))]


def complete_object(points, net: VcnNet, pcfg: PostprocConfig, seed=0):
    if len(points) == 0:
        raise EmptySelection("mask selects no points")
    obj = dominant_cluster(points, pcfg)
    out = run_vcn_vc(PointCloud(obj), net, seed)
    return postprocess(out.completed, PointCloud(obj), pcfg).cloud.points, out


def complete_scene(points, masks, net: VcnNet, pcfg: PostprocConfig, seed=0):
    """Background points (in no mask) keep their order and values; completions follow.

    Returns (points, report).
    """
    in_mask = np.zeros(len(points), dtype=bool)
    for _, idx in masks:
        in_mask[idx] = True
    parts = [points[~in_mask]]
    report = {"n_input": len(points), "n_background": int((~in_mask).sum()), "objects": [], "skipped": []}
    for k, (name, idx) in enumerate(masks):
        try:
            completed, out = complete_object(points[idx], net, pcfg, [seed, 19, k])
        except (EmptySelection, EmptyInput, KTooLarge) as exc:
            parts.append(points[idx])
            report["skipped"].append({"name": name, "reason": str(exc)})
            continue
        parts.append(completed)
        report["objects"].append({
            "name": name, "n_in": int(len(idx)), "n_out": int(len(completed)),
            "box": {"center": out.box.center.tolist(), "dims": out.box.dims.tolist(), "yaw": float(out.box.yaw)},
        })
    result = np.concatenate(parts, axis=0) if parts else np.zeros((0, 3))
    report["n_output"] = len(result)
    return result, report


def cmd_complete(cfg: RunConfig, input_ply, masks_path, checkpoint, out):
    """Write ``out`` (a .ply) plus a ``.json`` report next to it."""
    points = read_ply(input_ply)
    masks = read_masks(masks_path, len(points))
    net = load_net(checkpoint) if masks else None
    result, report = complete_scene(points, masks, net, cfg.postproc, cfg.seed)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ply(out, result)
    out.with_suffix(".json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out, report
