"""Loss terms and their gradients.

Each ``*_grad`` function returns ``(value, gradient w.r.t. the prediction)``.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyInput, ShapeMismatch

GEODESIC_CLAMP = 1e-7


def smooth_l1_grad(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"smooth-l1: {pred.shape} vs {gt.shape}")
    d = pred - gt
    ad = np.abs(d)
    small = ad < 1.0
    val = np.where(small, 0.5 * d * d, ad - 0.5).mean()
    grad = np.where(small, d, np.sign(d)) / d.size
    return float(val), grad


def loss_smooth_l1(pred, gt) -> float:
    return smooth_l1_grad(pred, gt)[0]


def geodesic_grad(r_pred, r_gt):
    """Angle of ``r_pred @ r_gt.T``; the gradient is zero where the cosine is clamped."""
    r_pred = np.asarray(r_pred, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    c = (np.sum(r_pred * r_gt) - 1.0) / 2.0
    lim = 1.0 - GEODESIC_CLAMP
    if c >= lim or c <= -lim:
        return float(np.arccos(np.clip(c, -lim, lim))), np.zeros((3, 3))
    return float(np.arccos(c)), (-0.5 / np.sqrt(1.0 - c * c)) * r_gt


def loss_geodesic(r_pred, r_gt) -> float:
    return geodesic_grad(r_pred, r_gt)[0]


def chamfer_grad(s, g, g_tree=None):
    """Symmetric mean nearest-neighbour Euclidean distance, and d/ds.

    Coincident pairs contribute a zero (sub)gradient.
    """
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if len(s) == 0 or len(g) == 0:
        raise EmptyInput("chamfer distance needs non-empty clouds")
    g_tree = cKDTree(g) if g_tree is None else g_tree
    d_sg, i_sg = g_tree.query(s, k=1)
    d_gs, i_gs = cKDTree(s).query(g, k=1)
    val = d_sg.mean() + d_gs.mean()
    grad = np.zeros_like(s)
    diff = s - g[i_sg]
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(d_sg[:, None] > 0, diff / d_sg[:, None], 0.0)
    grad += unit / len(s)
    diff2 = s[i_gs] - g
    with np.errstate(invalid="ignore", divide="ignore"):
        unit2 = np.where(d_gs[:, None] > 0, diff2 / d_gs[:, None], 0.0)
    for c in range(3):
        grad[:, c] += np.bincount(i_gs, unit2[:, c], minlength=len(s)) / len(g)
    return float(val), grad


def loss_chamfer(s, g) -> float:
    s = s.points if hasattr(s, "points") else s
    g = g.points if hasattr(g, "points") else g
    return chamfer_grad(s, g)[0]
