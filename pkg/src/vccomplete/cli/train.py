"""Training loop: seeded mini-batches, Adam, JSON-lines loss log, resumable checkpoints."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .. import nncore
from ..errors import ConfigError, DegenerateSixD, NumericFailure
from ..plyio import read_record
from ..vcn.network import VcnConfig, VcnNet, init_params
from ..vcn.pipeline import TrainSample, forward, loss_total
from .config import RunConfig

log = logging.getLogger(__name__)

LOSS_KEYS = ("L_complete", "L_knn", "L_dims", "L_t", "L_R", "total")


def read_split(dataset: Path) -> dict:
    path = dataset / "split.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run `gen` first")
    return json.loads(path.read_text(encoding="utf-8"))


def load_samples(dataset: Path, split: str, partial_name="partial", min_points=1, max_samples=None):
    """Records of one split in split-file order, filtered by partial size."""
    ids = read_split(dataset)[split]
    out = []
    for sid in ids:
        rec = read_record(dataset / "samples" / sid, partial_name)
        if len(rec.partial) < min_points:
            continue
        out.append((sid, rec))
        if max_samples is not None and len(out) >= max_samples:
            break
    return out


def batch_indices(seed, n, step, batch_size):
    """Sample indices for 0-based ``step``: consecutive slices of per-epoch permutations.

    Only depends on (seed, n, step), so a resumed run draws the same batches.
    """
    start = step * batch_size
    out = []
    for pos in range(start, start + batch_size):
        epoch, k = divmod(pos, n)
        out.append(int(np.random.default_rng([seed, 5, epoch]).permutation(n)[k]))
    return out


def build_train_samples(cfg: RunConfig, records, vcn: VcnConfig):
    samples = []
    for i, (sid, rec) in enumerate(records):
        samples.append(TrainSample.build(sid, rec.partial.points, rec.complete.points, rec.gt_pose,
                                         rec.gt_box.dims, vcn.k_retain, vcn.m_max, seed=[cfg.seed, 13, i]))
    return samples


def train_step(net: VcnNet, batch, tc):
    """Average the loss gradients over ``batch`` and take one Adam step; returns mean components."""
    net.params.zero_grad()
    sums = dict.fromkeys(LOSS_KEYS, 0.0)
    for sample in batch:
        try:
            trace = forward(net, sample.partial, sample.gt_pose, net.cfg.canonicalize_with)
            _, comps = loss_total(net, sample, trace)
        except DegenerateSixD as exc:
            raise NumericFailure(f"degenerate rotation output: {exc}", sample.sample_id) from exc
        for k in LOSS_KEYS:
            sums[k] += comps[k]
    scale = 1.0 / len(batch)
    for n, g in net.params.grads.items():
        g *= scale
        if not np.all(np.isfinite(g)):
            raise NumericFailure(f"non-finite gradient in {n}", ",".join(s.sample_id for s in batch))
    nncore.adam_step(net.params, tc.lr, tc.beta1, tc.beta2, tc.eps)
    return {k: v * scale for k, v in sums.items()}


def _truncate_log(path: Path, step: int):
    if not path.exists():
        return
    keep = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln and json.loads(ln)["step"] <= step]
    path.write_text("".join(ln + "\n" for ln in keep), encoding="utf-8")


def cmd_train(cfg: RunConfig, resume=None, out_dir=None):
    """Train from scratch, or continue from checkpoint ``resume``. Returns the run directory."""
    tc = cfg.train
    run = Path(out_dir) if out_dir is not None else cfg.path(cfg.run_dir)
    run.mkdir(parents=True, exist_ok=True)
    log_path = run / "loss_log.jsonl"

    if resume is not None:
        params, extra = nncore.load_checkpoint(resume)
        vcn = VcnConfig.from_dict(extra["vcn"]) if "vcn" in extra else cfg.vcn
        _truncate_log(log_path, params.step)
    else:
        vcn = cfg.vcn
        params = init_params(vcn, cfg.seed if tc.init_seed is None else tc.init_seed)
        log_path.write_text("", encoding="utf-8")
    net = VcnNet(params, vcn)

    records = load_samples(cfg.path(cfg.dataset_dir), tc.split, tc.partial, tc.min_points, tc.max_samples)
    if not records:
        raise ConfigError(f"split {tc.split!r} has no samples with >= {tc.min_points} points")
    samples = build_train_samples(cfg, records, vcn)
    extra = {"vcn": vcn.to_dict(), "seed": cfg.seed}

    with log_path.open("a", encoding="utf-8") as fh:
        while params.step < tc.steps:
            step = params.step
            idx = batch_indices(cfg.seed, len(samples), step, tc.batch_size)
            comps = train_step(net, [samples[i] for i in idx], tc)
            rec = {"step": step + 1, **comps, "samples": [samples[i].sample_id for i in idx]}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
            if tc.checkpoint_every and params.step % tc.checkpoint_every == 0:
                nncore.save_checkpoint(run / f"ckpt_{params.step:06d}.bin", params, extra)
    nncore.save_checkpoint(run / "last.bin", params, extra)
    log.info("trained to step %d in %s", params.step, run)
    return run


def read_loss_log(path):
    return [json.loads(ln) for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln]


def load_net(checkpoint) -> VcnNet:
    params, extra = nncore.load_checkpoint(checkpoint)
    if "vcn" not in extra:
        raise ConfigError(f"{checkpoint}: no network config stored in checkpoint")
    return VcnNet(params, VcnConfig.from_dict(extra["vcn"]))
