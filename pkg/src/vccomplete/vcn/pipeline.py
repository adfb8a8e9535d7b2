"""Frame chain around the network, the joint training loss and both run modes.

Shapes: viewer/frustum clouds are (M, 3) float64 arrays, completions (N, 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyInput, NumericFailure
from ..geometry import (Box3, Frame, PointCloud, RigidPose, box_from_canonical, box_to_viewer, frustum_angle,
                        rot_up, viewer_pose)
from ..postproc import knn_retain_indices
from .losses import chamfer_grad, geodesic_grad, smooth_l1_grad
from .network import VcnNet, rot6d_backward, rot6d_forward


@dataclass
class PoseEstimate:
    delta_t: np.ndarray  # frustum-mean centroid -> canonical origin, in the frustum frame
    rot6d: np.ndarray
    rotation: np.ndarray  # frustum -> canonical, row-vector convention


@dataclass
class ForwardTrace:
    theta: float
    centroid: np.ndarray
    p_f: np.ndarray
    pose: PoseEstimate | None
    frustum_pose: RigidPose  # pose actually used to canonicalize
    p_cn: np.ndarray
    s_cn: np.ndarray
    s_vc: np.ndarray
    features: tuple = ()
    pose_cache: tuple | None = None
    rot_cache: tuple | None = None
    complete_cache: tuple | None = None

    def viewer_pose(self) -> RigidPose:
        return viewer_pose(self.frustum_pose, self.theta)


def cap_points(points, m_max, seed=0):
    """Seeded random subset of at most ``m_max`` points (input order kept)."""
    if len(points) <= m_max:
        return points
    idx = np.sort(np.random.default_rng(seed).choice(len(points), size=m_max, replace=False))
    return points[idx]


def frustum_stage(p_vc):
    theta = frustum_angle(PointCloud(p_vc))
    p_f = p_vc @ rot_up(-theta)
    centroid = p_f.mean(axis=0)
    return theta, p_f, centroid


def gt_frustum_pose(gt_pose: RigidPose, theta: float) -> RigidPose:
    """Viewer->canonical ground truth re-expressed as frustum->canonical."""
    return RigidPose(rot_up(theta) @ gt_pose.rotation, gt_pose.translation @ rot_up(-theta))


def estimate_pose(net: VcnNet, p_fm):
    out, cache = net.pose_forward(p_fm)
    delta_t, v6 = out[:3], out[3:]
    if net.cfg.estimate_rotation:
        rot, rcache = rot6d_forward(v6)
    else:
        rot, rcache = np.eye(3), None
    return PoseEstimate(delta_t, v6, rot), cache, rcache


def forward(net: VcnNet, p_vc, gt_pose: RigidPose | None = None, canonicalize_with: str = "pred",
            run_pose: bool = True, complete_fn: Callable | None = None) -> ForwardTrace:
    """Run the full chain on one (already capped) viewer-frame cloud."""
    p_vc = np.asarray(p_vc, dtype=np.float64)
    if len(p_vc) == 0:
        raise EmptyInput("no input points")
    theta, p_f, centroid = frustum_stage(p_vc)
    pose = pose_cache = rcache = None
    if run_pose:
        pose, pose_cache, rcache = estimate_pose(net, p_f - centroid)
    if canonicalize_with == "gt":
        if gt_pose is None:
            raise ValueError("ground-truth canonicalization needs gt_pose")
        fpose = gt_frustum_pose(gt_pose, theta)
    else:
        fpose = RigidPose(pose.rotation, centroid + pose.delta_t)
    p_cn = fpose.apply(p_f)
    if complete_fn is not None:
        s_cn, ccache, feats = np.asarray(complete_fn(p_cn), dtype=np.float64), None, ()
    else:
        s_cn, ccache, feats = net.complete_forward(p_cn)
    s_vc = fpose.apply_inverse(s_cn) @ rot_up(theta)
    return ForwardTrace(theta, centroid, p_f, pose, fpose, p_cn, s_cn, s_vc, feats, pose_cache, rcache, ccache)


# ---------------------------------------------------------------- training loss


@dataclass
class TrainSample:
    """Per-sample tensors precomputed once for training."""

    sample_id: str
    partial: np.ndarray  # capped P_vc
    complete: np.ndarray  # G_vc
    complete_tree: cKDTree
    complete_knn: np.ndarray  # G_vc,knn
    gt_pose: RigidPose
    gt_dims: np.ndarray

    @classmethod
    def build(cls, sample_id, partial, complete, gt_pose, gt_dims, k_retain, m_max, seed=0):
        partial = cap_points(np.asarray(partial, dtype=np.float64), m_max, seed)
        complete = np.asarray(complete, dtype=np.float64)
        k = min(k_retain, len(complete))
        g_knn = complete[knn_retain_indices(complete, partial, k)]
        return cls(sample_id, partial, complete, cKDTree(complete), g_knn, gt_pose, np.asarray(gt_dims, float))


def _dims_grad(s_cn, gt_dims):
    lo_i, hi_i = np.argmin(s_cn, axis=0), np.argmax(s_cn, axis=0)
    cols = np.arange(3)
    dims = s_cn[hi_i, cols] - s_cn[lo_i, cols]
    val, dd = smooth_l1_grad(dims, gt_dims)
    g = np.zeros_like(s_cn)
    np.add.at(g, (hi_i, cols), dd)
    np.add.at(g, (lo_i, cols), -dd)
    return val, g


def loss_total(net: VcnNet, sample: TrainSample, trace: ForwardTrace, backward: bool = True):
    """Joint loss ``L_complete + L_knn + L_dims + alpha * L_t + L_R``.

    Gradients are accumulated into ``net.params.grads`` when ``backward``.
    The KNN selection is recomputed from the current prediction and held
    constant.  Returns (total, components).
    """
    cfg = net.cfg
    pred_canon = cfg.canonicalize_with == "pred"
    r_th = rot_up(trace.theta)
    l_c, d_svc = chamfer_grad(trace.s_vc, sample.complete, sample.complete_tree)
    k = min(cfg.k_retain, len(trace.s_vc))
    sel = knn_retain_indices(trace.s_vc, sample.partial, k)
    l_k, d_sel = chamfer_grad(trace.s_vc[sel], sample.complete_knn)
    d_svc[sel] += d_sel
    l_d, d_scn = _dims_grad(trace.s_cn, sample.gt_dims)

    gt_f = gt_frustum_pose(sample.gt_pose, trace.theta)
    dt_gt = gt_f.translation - trace.centroid
    l_t, d_dt = smooth_l1_grad(trace.pose.delta_t, dt_gt)
    l_r, d_rvc = 0.0, np.zeros((3, 3))
    if cfg.estimate_rotation:
        l_r, d_rvc = geodesic_grad(rot_up(-trace.theta) @ trace.pose.rotation, sample.gt_pose.rotation)
    total = l_c + l_k + l_d + cfg.alpha * l_t + l_r
    comps = {"L_complete": l_c, "L_knn": l_k, "L_dims": l_d, "L_t": l_t, "L_R": l_r, "total": total}
    if not all(math.isfinite(v) for v in comps.values()):
        raise NumericFailure(f"non-finite loss {comps}", sample.sample_id)
    if not backward:
        return total, comps

    r_c = trace.frustum_pose.rotation
    t_c = trace.frustum_pose.translation
    d_sf = d_svc @ r_th.T
    d_scn = d_scn + d_sf @ r_c
    d_pcn = net.complete_backward(d_scn, trace.complete_cache, need_input_grad=pred_canon)
    d_dt = cfg.alpha * d_dt
    d_rfc = rot_up(-trace.theta).T @ d_rvc
    if pred_canon:
        d_rfc = d_rfc + d_sf.T @ trace.s_cn + (trace.p_f - t_c).T @ d_pcn
        d_dt = d_dt + d_sf.sum(axis=0) - (d_pcn @ r_c.T).sum(axis=0)
    d_v6 = rot6d_backward(d_rfc, trace.rot_cache) if cfg.estimate_rotation else np.zeros(6)
    d_out = np.concatenate([d_dt, d_v6])
    if not np.all(np.isfinite(d_out)):
        raise NumericFailure("non-finite pose gradient", sample.sample_id)
    net.pose_backward(d_out, trace.pose_cache)
    return total, comps


# ---------------------------------------------------------------- run modes


class VcnOutput(NamedTuple):
    completed: PointCloud  # S_vc
    pose: RigidPose  # viewer -> canonical
    box: Box3  # viewer frame


def pose_head(p_fm: PointCloud, net: VcnNet) -> PoseEstimate:
    if p_fm.frame is not Frame.FRUSTUM_MEAN:
        raise ValueError("pose head expects a frustum-mean cloud")
    return estimate_pose(net, p_fm.points)[0]


def complete(p_cn: PointCloud, net: VcnNet) -> PointCloud:
    if p_cn.frame is not Frame.CANONICAL:
        raise ValueError("completion expects a canonical cloud")
    return PointCloud(net.complete_forward(p_cn.points)[0], Frame.CANONICAL)


def run_vcn_cn(partial: PointCloud, gt_pose: RigidPose, net: VcnNet, complete_fn: Callable | None = None,
               seed: int = 0) -> PointCloud:
    """Complete in the ground-truth canonical frame; no pose estimation."""
    p = cap_points(partial.points, net.cfg.m_max, seed)
    trace = forward(net, p, gt_pose, canonicalize_with="gt", run_pose=False, complete_fn=complete_fn)
    return PointCloud(trace.s_vc)


def trace_vcn_vc(partial: PointCloud, net: VcnNet, seed: int = 0) -> ForwardTrace:
    p = cap_points(partial.points, net.cfg.m_max, seed)
    return forward(net, p, canonicalize_with="pred")


def run_vcn_vc(partial: PointCloud, net: VcnNet, seed: int = 0) -> VcnOutput:
    """Estimate the pose, complete, and return the completion with pose and box."""
    trace = trace_vcn_vc(partial, net, seed)
    pose = trace.viewer_pose()
    box_cn = box_from_canonical(PointCloud(trace.s_cn, Frame.CANONICAL), strict=False)
    return VcnOutput(PointCloud(trace.s_vc), pose, box_to_viewer(box_cn, pose))
