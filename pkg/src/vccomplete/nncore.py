"""Small differentiable substrate with hand-written backward passes.

Tensors are plain 2-D numpy arrays, rows indexing points.  Every forward
function has a matching ``*_backward`` taking the upstream gradient.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import CheckpointError, EmptyInput, MissingGrad, ShapeMismatch

CHECKPOINT_MAGIC = b"VCNCKPT1\n"


def dense_forward(x, W, b):
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[0] or b.shape[-1] != W.shape[1]:
        raise ShapeMismatch(f"dense: x{x.shape} W{W.shape} b{b.shape}")
    return x @ W + b


def dense_backward(dy, x, W):
    """Returns (dx, dW, db)."""
    return dy @ W.T, x.T @ dy, dy.sum(axis=0, keepdims=True)


def leaky_relu(x, slope):
    # same as where(x >= 0, x, slope * x) for 0 < slope < 1
    return np.maximum(x, slope * x)


def leaky_relu_backward(dy, x, slope):
    # the kink at 0 takes the positive branch
    return np.where(x >= 0, dy, slope * dy)


def max_pool_points(x):
    """Column-wise max over rows. Returns (pooled (1, D), argmax rows (D,))."""
    if x.shape[0] < 1:
        raise EmptyInput("max pool over zero points")
    m = x.max(axis=0)
    # argmax over a bool mask is much faster than over floats along axis 0; first hit wins
    idx = np.argmax(x == m, axis=0)
    return m[None, :], idx


def max_pool_backward(dy, idx, n_rows):
    dx = np.zeros((n_rows, dy.shape[1]), dtype=dy.dtype)
    dx[idx, np.arange(dy.shape[1])] = dy[0]
    return dx


def dense_pool_backward(dg, idx, x, W):
    """Backward of ``max_pool_points(dense_forward(x, W, b))`` given the pooled gradient.

    Only the argmax row of each column receives gradient, so this costs
    O(D_in * D_out) instead of a full (M, D_in, D_out) product.  Returns (dx, dW, db).
    """
    dg = dg[0]
    dW = x[idx].T * dg
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    starts = np.flatnonzero(np.r_[True, sidx[1:] != sidx[:-1]])
    dx = np.zeros_like(x, dtype=np.result_type(x, W))
    dx[sidx[starts]] = np.add.reduceat(W.T[order] * dg[order, None], starts, axis=0)
    return dx, dW, dg[None, :].copy()


def concat_broadcast(x, g):
    if g.ndim != 2 or g.shape[0] != 1 or x.ndim != 2:
        raise ShapeMismatch(f"concat: x{x.shape} g{g.shape}")
    return np.concatenate([x, np.broadcast_to(g, (x.shape[0], g.shape[1]))], axis=1)


def concat_broadcast_backward(dy, d):
    """Split the gradient of ``concat_broadcast`` back into (dx, dg)."""
    return dy[:, :d], dy[:, d:].sum(axis=0, keepdims=True)


def dense_concat_forward(x, g, W, b):
    """``dense_forward(concat_broadcast(x, g), W, b)`` without materialising the concat."""
    d = x.shape[1]
    if g.shape != (1, W.shape[0] - d):
        raise ShapeMismatch(f"dense concat: x{x.shape} g{g.shape} W{W.shape}")
    return x @ W[:d] + (g @ W[d:] + b)


def dense_concat_backward(dy, x, g, W):
    """Returns (dx, dg, dW, db) for :func:`dense_concat_forward`."""
    d = x.shape[1]
    dsum = dy.sum(axis=0, keepdims=True)
    dW = np.concatenate([x.T @ dy, g.T @ dsum], axis=0)
    return dy @ W[:d].T, dsum @ W[d:].T, dW, dsum


class ParamStore:
    """Named parameters with gradients, iterated in sorted name order."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.step = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def add(self, name, value):
        if name in self.values:
            raise KeyError(f"duplicate parameter {name!r}")
        self.values[name] = np.array(value, dtype=self.dtype)
        self._m[name] = np.zeros_like(self.values[name])
        self._v[name] = np.zeros_like(self.values[name])

    def names(self):
        return sorted(self.values)

    def __getitem__(self, name):
        return self.values[name]

    def __contains__(self, name):
        return name in self.values

    def zero_grad(self):
        self.grads = {n: np.zeros_like(v) for n, v in self.values.items()}

    def accumulate(self, name, grad):
        if name not in self.grads:
            self.grads[name] = np.zeros_like(self.values[name])
        self.grads[name] += grad

    def num_parameters(self):
        return sum(v.size for v in self.values.values())

    def astype(self, dtype) -> "ParamStore":
        out = ParamStore(dtype)
        for n in self.names():
            out.add(n, self.values[n])
            out._m[n] = self._m[n].astype(dtype)
            out._v[n] = self._v[n].astype(dtype)
        out.step = self.step
        return out

    def copy(self) -> "ParamStore":
        return self.astype(self.dtype)

    def flat(self):
        return np.concatenate([self.values[n].ravel() for n in self.names()])

    def flat_grad(self):
        return np.concatenate([self.grads[n].ravel() for n in self.names()])

    def set_flat(self, vec):
        off = 0
        for n in self.names():
            v = self.values[n]
            v[...] = vec[off:off + v.size].reshape(v.shape)
            off += v.size


def glorot_uniform(rng, fan_in, fan_out):
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def adam_step(params: ParamStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, t=None):
    """One bias-corrected Adam update using ``params.grads``.

    ``t`` is the 1-based step count; defaults to ``params.step + 1``.
    """
    t = params.step + 1 if t is None else t
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for n in params.names():
        if n not in params.grads:
            raise MissingGrad(n)
        g = params.grads[n]
        m = params._m[n]
        v = params._v[n]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        # lr * (m / c1) / (sqrt(v / c2) + eps), with few temporaries
        denom = np.sqrt(v)
        denom *= 1.0 / math.sqrt(c2)
        denom += eps
        step = np.divide(m, denom, out=denom)
        step *= lr / c1
        params.values[n] -= step.astype(params.dtype, copy=False)
    params.step = t
    return params


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path, params: ParamStore, extra: dict | None = None):
    """Write a JSON header line followed by the little-endian raw payload.

    Payload order is header order: for each name, value then Adam moments.
    """
    dt = params.dtype.newbyteorder("<")
    chunks, entries = [], []
    for n in params.names():
        v = params.values[n]
        entries.append({"name": n, "shape": list(v.shape)})
        for arr in (v, params._m[n], params._v[n]):
            chunks.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    payload = b"".join(chunks)
    header = {
        "dtype": dt.str,
        "step": params.step,
        "params": entries,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "extra": extra or {},
    }
    data = CHECKPOINT_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    Path(path).write_bytes(data)


def load_checkpoint(path) -> tuple[ParamStore, dict]:
    """Read a checkpoint; any inconsistency raises CheckpointError before anything is built."""
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    nl = data.find(b"\n", len(CHECKPOINT_MAGIC))
    if nl < 0:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[len(CHECKPOINT_MAGIC):nl])
        dt = np.dtype(header["dtype"])
        entries = header["params"]
        step = int(header["step"])
        expect = int(header["payload_bytes"])
        digest = header["payload_sha256"]
        shapes = [(e["name"], tuple(int(s) for s in e["shape"])) for e in entries]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    payload = data[nl + 1:]
    need = sum(3 * int(np.prod(s)) for _, s in shapes) * dt.itemsize
    if len(payload) != expect or need != expect:
        raise CheckpointError(f"{path}: payload size mismatch ({len(payload)} vs {expect}, shapes need {need})")
    if hashlib.sha256(payload).hexdigest() != digest:
        raise CheckpointError(f"{path}: payload checksum mismatch")
    store = ParamStore(dt.newbyteorder("="))
    off = 0
    for name, shape in shapes:
        arrs = []
        for _ in range(3):
            n = int(np.prod(shape))
            arrs.append(np.frombuffer(payload, dtype=dt, count=n, offset=off).reshape(shape))
            off += n * dt.itemsize
        store.add(name, arrs[0])
        store._m[name] = arrs[1].astype(store.dtype)
        store._v[name] = arrs[2].astype(store.dtype)
    store.step = step
    return store, header.get("extra", {})
