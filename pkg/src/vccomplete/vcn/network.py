"""Pose head and completion encoder with explicit backward passes."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .. import nncore
from ..geometry import SIXD_EPS
from ..errors import DegenerateSixD, EmptyInput


@dataclass
class VcnConfig:
    """Network shape and loss weights.

    Widths list the output size of each dense layer.  ``final_hidden`` are the
    hidden widths of the last MLP; its output layer is always ``3 * n_out``.
    """

    pose_block1: tuple = (64, 128, 256)
    pose_block2: tuple = (256, 128, 9)
    enc_stage1: tuple = (128, 256)
    enc_stage2: tuple = (512, 1024)
    final_hidden: tuple = (1024,)
    n_out: int = 1024
    alpha: float = 1.0
    slope: float = 0.01
    m_max: int = 2048
    k_retain: int = 5
    estimate_rotation: bool = True
    # "pred": completion runs in the predicted canonical frame and its losses also train the pose head
    canonicalize_with: str = "pred"
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("pose_block1", "pose_block2", "enc_stage1", "enc_stage2", "final_hidden"):
            widths = tuple(int(w) for w in getattr(self, name))
            if any(w < 1 for w in widths):
                raise ValueError(f"{name} widths must be >= 1")
            setattr(self, name, widths)
        if not self.pose_block1 or not self.pose_block2 or not self.enc_stage1 or not self.enc_stage2:
            raise ValueError("every block needs at least one layer")
        if self.pose_block2[-1] != 9:
            raise ValueError("pose head must end in 9 outputs (3 translation + 6 rotation)")
        if self.n_out < 1 or self.alpha <= 0 or not 0 < self.slope < 1 or self.m_max < 1:
            raise ValueError("invalid n_out / alpha / slope / m_max")
        if self.canonicalize_with not in ("pred", "gt"):
            raise ValueError("canonicalize_with must be 'pred' or 'gt'")

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def blocks(self):
        """(prefix, input width, widths) of every MLP in forward order."""
        return [
            ("pose1", 3, self.pose_block1),
            ("pose2", self.pose_block1[-1], self.pose_block2),
            ("enc1", 3, self.enc_stage1),
            ("enc2", 2 * self.enc_stage1[-1], self.enc_stage2),
            ("final", self.enc_stage2[-1], self.final_hidden + (3 * self.n_out,)),
        ]


def init_params(cfg: VcnConfig, seed: int = 0) -> nncore.ParamStore:
    rng = np.random.default_rng(seed)
    store = nncore.ParamStore(cfg.dtype)
    for prefix, fan_in, widths in cfg.blocks():
        for li, w in enumerate(widths):
            store.add(f"{prefix}.{li}.W", nncore.glorot_uniform(rng, fan_in, w))
            store.add(f"{prefix}.{li}.b", np.zeros((1, w)))
            fan_in = w
    # small non-degenerate rotation bias: start near the identity
    b = store[f"pose2.{len(cfg.pose_block2) - 1}.b"]
    b[0, 3:9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
    return store


def mlp_forward(params, prefix, n_layers, x, slope, start=0):
    """Dense layers ``start..n_layers-1`` with leaky ReLU between them (none after the last)."""
    cache = []
    for li in range(start, n_layers):
        W, b = params[f"{prefix}.{li}.W"], params[f"{prefix}.{li}.b"]
        z = nncore.dense_forward(x, W, b)
        cache.append((x, z))
        x = nncore.leaky_relu(z, slope) if li < n_layers - 1 else z
    return x, cache


def mlp_backward(params, prefix, cache, dy, slope, need_input_grad=True, pool_idx=None, start=0):
    """Backprop ``dy`` through a block.  With ``pool_idx`` set, ``dy`` is the
    gradient of a max pool over the block output (argmax rows ``pool_idx``)."""
    n_layers = start + len(cache)
    for li in range(n_layers - 1, start - 1, -1):
        x, z = cache[li - start]
        if li < n_layers - 1:
            dy = nncore.leaky_relu_backward(dy, z, slope)
        W = params[f"{prefix}.{li}.W"]
        if pool_idx is not None and li == n_layers - 1:
            dx, dW, db = nncore.dense_pool_backward(dy, pool_idx, x, W)
            params.accumulate(f"{prefix}.{li}.W", dW)
            params.accumulate(f"{prefix}.{li}.b", db)
            dy = dx
            continue
        if li == start and not need_input_grad:
            params.accumulate(f"{prefix}.{li}.W", x.T @ dy)
            params.accumulate(f"{prefix}.{li}.b", dy.sum(axis=0, keepdims=True))
            return None
        dx, dW, db = nncore.dense_backward(dy, x, W)
        params.accumulate(f"{prefix}.{li}.W", dW)
        params.accumulate(f"{prefix}.{li}.b", db)
        dy = dx
    return dy


class VcnNet:
    """Parameters plus the two network stages."""

    def __init__(self, params: nncore.ParamStore, cfg: VcnConfig):
        self.params = params
        self.cfg = cfg
        self.dtype = params.dtype

    # ---------------------------------------------------------- pose head

    def pose_forward(self, p_fm):
        """Per-point MLP, max pool, MLP -> 9 values."""
        if len(p_fm) == 0:
            raise EmptyInput("pose head needs at least one point")
        cfg = self.cfg
        x = np.asarray(p_fm, dtype=self.dtype)
        h, c1 = mlp_forward(self.params, "pose1", len(cfg.pose_block1), x, cfg.slope)
        g, arg = nncore.max_pool_points(h)
        out, c2 = mlp_forward(self.params, "pose2", len(cfg.pose_block2), g, cfg.slope)
        return out[0].astype(np.float64), (c1, arg, len(x), c2)

    def pose_backward(self, d_out, cache):
        c1, arg, m, c2 = cache
        slope = self.cfg.slope
        dg = mlp_backward(self.params, "pose2", c2, np.asarray(d_out, self.dtype)[None, :], slope)
        mlp_backward(self.params, "pose1", c1, dg, slope, need_input_grad=False, pool_idx=arg)

    # ---------------------------------------------------------- completion

    def complete_forward(self, p_cn):
        """Two point-feature stages with pooling, then reshape to (n_out, 3)."""
        if len(p_cn) == 0:
            raise EmptyInput("completion needs at least one point")
        cfg = self.cfg
        x = np.asarray(p_cn, dtype=self.dtype)
        f1, c1 = mlp_forward(self.params, "enc1", len(cfg.enc_stage1), x, cfg.slope)
        g1, arg1 = nncore.max_pool_points(f1)
        # first stage-2 layer sees [f_i, g1]; the g1 half is one shared row
        n2 = len(cfg.enc_stage2)
        z0 = nncore.dense_concat_forward(f1, g1, self.params["enc2.0.W"], self.params["enc2.0.b"])
        f2 = nncore.leaky_relu(z0, cfg.slope) if n2 > 1 else z0
        f2, c2 = mlp_forward(self.params, "enc2", n2, f2, cfg.slope, start=1)
        g2, arg2 = nncore.max_pool_points(f2)
        out, c3 = mlp_forward(self.params, "final", len(cfg.final_hidden) + 1, g2, cfg.slope)
        s_cn = out.reshape(cfg.n_out, 3).astype(np.float64)
        cache = (c1, arg1, f1, g1, z0, c2, arg2, c3)
        return s_cn, cache, (f1, g1, g2)

    def complete_backward(self, d_scn, cache, need_input_grad=False):
        c1, arg1, f1, g1, z0, c2, arg2, c3 = cache
        slope = self.cfg.slope
        d_out = np.asarray(d_scn, dtype=self.dtype).reshape(1, -1)
        dg2 = mlp_backward(self.params, "final", c3, d_out, slope)
        if c2:
            dz0 = mlp_backward(self.params, "enc2", c2, dg2, slope, pool_idx=arg2, start=1)
            dz0 = nncore.leaky_relu_backward(dz0, z0, slope)
        else:
            dz0 = nncore.max_pool_backward(dg2, arg2, len(z0))
        df1, dg1, dW, db = nncore.dense_concat_backward(dz0, f1, g1, self.params["enc2.0.W"])
        self.params.accumulate("enc2.0.W", dW)
        self.params.accumulate("enc2.0.b", db)
        df1 = df1 + nncore.max_pool_backward(dg1, arg1, len(f1))
        dx = mlp_backward(self.params, "enc1", c1, df1, slope, need_input_grad=need_input_grad)
        return None if dx is None else dx.astype(np.float64)


# ---------------------------------------------------------------- 6D rotation gradient


def rot6d_forward(v):
    """Gram-Schmidt with intermediates kept for the backward pass."""
    v = np.asarray(v, dtype=np.float64)
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
    b3 = np.cross(b1, b2)
    return np.column_stack([b1, b2, b3]), (a2, n1, b1, n2, b2)


def rot6d_backward(d_r, cache):
    """Gradient of the 6-vector given dL/dR for R = [b1 b2 b3] (columns)."""
    a2, n1, b1, n2, b2 = cache
    db1 = d_r[:, 0] + np.cross(b2, d_r[:, 2])
    db2 = d_r[:, 1] + np.cross(d_r[:, 2], b1)
    du = (db2 - b2 * (b2 @ db2)) / n2
    # u = a2 - (b1 . a2) b1
    da2 = du - b1 * (b1 @ du)
    db1 = db1 - (b1 @ a2) * du - a2 * (b1 @ du)
    da1 = (db1 - b1 * (b1 @ db1)) / n1
    return np.concatenate([da1, da2])
