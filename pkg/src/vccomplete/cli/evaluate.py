"""Evaluation: VCN-VC per test sample, box/pose/Chamfer metrics, point-count buckets."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..geometry import (Frame, PointCloud, RigidPose, box_from_canonical, box_to_viewer, iou_3d, iou_bev, rot_up)
from ..postproc import PostprocConfig, knn_retain_indices, postprocess
from ..vcn.losses import loss_chamfer, loss_geodesic
from ..vcn.network import VcnNet
from ..vcn.pipeline import trace_vcn_vc
from .config import RunConfig
from .train import load_net, load_samples

# (label, lowest count, highest count) of the input partial
BUCKETS = (
    (">=201", 201, None),
    ("81-200", 81, 200),
    ("31-80", 31, 80),
    ("5-30", 5, 30),
    ("<5", 0, 4),
)


def bucket_of(n_points: int) -> str:
    for label, lo, hi in BUCKETS:
        if n_points >= lo and (hi is None or n_points <= hi):
            return label
    raise ValueError(f"negative point count {n_points}")


def inject_outliers(points, fraction, extent, rng):
    """Replace ``fraction`` of the rows with uniform points in a cube of half-size ``extent``
    around the cloud's mean."""
    n = int(round(fraction * len(points)))
    if n == 0:
        return points
    out = points.copy()
    idx = rng.choice(len(points), size=n, replace=False)
    out[idx] = points.mean(axis=0) + rng.uniform(-extent, extent, size=(n, 3))
    return out


def filter_completion(s_vc, partial, mode: str, pcfg: PostprocConfig):
    if mode == "none":
        return s_vc
    if mode == "knn":
        return s_vc[knn_retain_indices(s_vc, partial, min(pcfg.k_retain, len(s_vc)))]
    return postprocess(PointCloud(s_vc), PointCloud(partial), pcfg).cloud.points


def fit_box(points_vc, theta, frustum_pose: RigidPose, pose_vc: RigidPose):
    """Bounds of viewer-frame points in the (estimated) canonical frame, as a viewer-frame box."""
    p_cn = frustum_pose.apply(points_vc @ rot_up(-theta))
    return box_to_viewer(box_from_canonical(PointCloud(p_cn, Frame.CANONICAL), strict=False), pose_vc)


def evaluate_sample(net: VcnNet | None, rec, ecfg, pcfg: PostprocConfig, seed):
    """Metrics of one record.  ``net=None`` evaluates the ground-truth oracle."""
    partial = rec.partial.points
    gt = rec.complete.points
    if net is None:
        s_vc, pose_vc = gt, rec.gt_pose
        theta = 0.0
        fpose = rec.gt_pose
    else:
        trace = trace_vcn_vc(rec.partial, net, seed)
        s_vc, pose_vc = trace.s_vc, trace.viewer_pose()
        theta, fpose = trace.theta, trace.frustum_pose
    rng = np.random.default_rng(seed)
    s_vc = inject_outliers(s_vc, ecfg.outlier_fraction, ecfg.outlier_extent, rng)
    kept = filter_completion(s_vc, partial, ecfg.postproc, pcfg)
    box = fit_box(kept, theta, fpose, pose_vc)
    rot_err = math.degrees(loss_geodesic(pose_vc.rotation, rec.gt_pose.rotation)) if net is not None else 0.0
    return {
        "cd_x1000": 1000.0 * loss_chamfer(s_vc, gt),
        "iou_bev": iou_bev(box, rec.gt_box),
        "iou_3d": iou_3d(box, rec.gt_box),
        "rot_deg": rot_err,
        "trans_m": float(np.linalg.norm(pose_vc.translation - rec.gt_pose.translation)),
        "n_points": len(partial),
        "bucket": bucket_of(len(partial)),
    }


def summarize(rows):
    if not rows:
        raise ValueError("no samples to summarize")

    def agg(rs):
        return {
            "n": len(rs),
            "cd_x1000": float(np.mean([r["cd_x1000"] for r in rs])),
            "iou_bev": float(np.mean([r["iou_bev"] for r in rs])),
            "iou_3d": float(np.mean([r["iou_3d"] for r in rs])),
            "rot_median_deg": float(np.median([r["rot_deg"] for r in rs])),
            "trans_mean_m": float(np.mean([r["trans_m"] for r in rs])),
        }

    report = agg(rows)
    report["buckets"] = {}
    for label, _, _ in BUCKETS:
        rs = [r for r in rows if r["bucket"] == label]
        report["buckets"][label] = agg(rs) if rs else {"n": 0}
    return report


def cmd_eval(cfg: RunConfig, checkpoint=None, out=None, oracle=False):
    """Evaluate ``checkpoint`` (or the ground-truth oracle) on ``cfg.eval.split``.

    Writes ``metrics.json`` (the report) and ``per_sample.jsonl`` into ``out``
    when given, and returns the report dict.
    """
    ec = cfg.eval
    net = None if oracle else load_net(checkpoint)
    records = load_samples(cfg.path(cfg.dataset_dir), ec.split, "partial", ec.min_points)
    if not records:
        raise ValueError(f"split {ec.split!r} has no samples with >= {ec.min_points} points")
    rows = []
    for i, (sid, rec) in enumerate(records):
        row = evaluate_sample(net, rec, ec, cfg.postproc, [cfg.seed, 17, i])
        rows.append({"sample": sid, **row})
    report = summarize(rows)
    report.update(split=ec.split, min_points=ec.min_points, postproc=ec.postproc,
                  outlier_fraction=ec.outlier_fraction, oracle=bool(oracle))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / "per_sample.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows),
                                              encoding="utf-8")
    return report
