"""Dataset generation: scenes -> dense partials -> scan-simulated partials on disk."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .. import lidarsim
from ..errors import ConfigError, EmptySelection
from ..geometry import PointCloud
from ..plyio import write_record
from ..synthgen.mesh import car_mesh, read_mesh, write_mesh
from ..synthgen.sampling import surface_hits, farthest_point_indices
from ..synthgen.scene import RayGrid, place_complete, random_manifest, render_scene, write_manifest
from .config import RunConfig

log = logging.getLogger(__name__)


def cmd_meshes(cfg: RunConfig, count: int | None = None):
    """Write procedural car meshes ``car_000.obj`` ... into the mesh directory."""
    n = count if count is not None else cfg.gen.procedural_meshes
    if n < 1:
        raise ConfigError("number of procedural meshes must be >= 1")
    out = cfg.path(cfg.gen.mesh_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        mesh = car_mesh(np.random.default_rng([cfg.seed, 7, i]))
        write_mesh(out / f"car_{i:03d}.obj", mesh)
    return out


def load_mesh_library(mesh_dir: Path):
    files = sorted(mesh_dir.glob("*.obj"))
    if not files:
        raise FileNotFoundError(f"no .obj meshes in {mesh_dir}")
    return {f.stem: read_mesh(f) for f in files}


def split_meshes(mesh_ids, test_fraction, seed):
    ids = sorted(mesh_ids)
    perm = np.random.default_rng([seed, 11]).permutation(len(ids))
    n_test = int(round(test_fraction * len(ids)))
    if len(ids) >= 2:
        n_test = min(max(n_test, 1), len(ids) - 1)
    test = sorted(ids[i] for i in perm[:n_test])
    train = sorted(ids[i] for i in perm[n_test:])
    return train, test


def cmd_gen(cfg: RunConfig, out_dir=None):
    """Render scenes until every mesh has ``views_per_model`` samples (or the scene cap)."""
    g = cfg.gen
    meshes = load_mesh_library(cfg.path(g.mesh_dir))
    out = Path(out_dir) if out_dir is not None else cfg.path(cfg.dataset_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifests").mkdir(exist_ok=True)
    (out / "samples").mkdir(exist_ok=True)

    surfaces = {}
    for mid, mesh in meshes.items():
        hits = surface_hits(mesh, g.n_views, g.surface_grid)
        if len(hits) < g.n_points:
            raise ConfigError(f"mesh {mid}: {len(hits)} surface hits < n_points={g.n_points}; raise surface_grid")
        surfaces[mid] = hits[farthest_point_indices(hits, g.n_points, 0)]
    dims = {mid: m.bounds()[1] - m.bounds()[0] for mid, m in meshes.items()}

    grid = RayGrid(g.ray_res_deg[0], g.ray_res_deg[1], tuple(g.vfov_deg), tuple(g.hfov_deg))
    pattern_sets = dict(bins=tuple(g.lidar_bins), ring_strides=tuple(g.ring_strides),
                        point_strides=tuple(g.point_strides), vfov=tuple(g.vfov_deg))
    counts = {mid: 0 for mid in meshes}
    samples = []
    sample_index = 0
    for scene in range(g.max_scenes):
        if min(counts.values()) >= g.views_per_model:
            break
        need = {mid: dims[mid] for mid, c in counts.items() if c < g.views_per_model}
        rng = np.random.default_rng([cfg.seed, 3, scene])
        manifest = random_manifest(rng, need, tuple(g.cars_per_scene), tuple(g.poles_per_scene), tuple(g.range_m),
                                   tuple(g.hfov_deg), tuple(g.dim_scale), g.sensor_height)
        write_manifest(out / "manifests" / f"scene_{scene:05d}.json", manifest)
        for rec in render_scene(manifest, meshes, grid, include_ground=g.include_ground):
            if len(rec.partial) < g.min_points:
                continue
            sid = f"{scene:05d}_{rec.meta['car_index']:02d}"
            dense = rec.partial
            extra = {}
            if g.lidar_sim:
                try:
                    sim, pattern = lidarsim.simulate(dense, cfg.seed, sample_index, **pattern_sets)
                except EmptySelection:
                    continue
                if len(sim) < g.min_points:
                    continue
                rec.partial = sim
                rec.meta.update(pattern={"n_bins": pattern.n_bins, "ring_stride": pattern.ring_stride,
                                         "point_stride": pattern.point_stride})
                extra["dense"] = dense.points
            rec.complete = PointCloud(place_complete(surfaces[rec.mesh_id], meshes[rec.mesh_id], rec.gt_box))
            rec.meta.update(scene=scene, sample_index=sample_index, n_dense=len(dense))
            write_record(out / "samples" / sid, rec, extra)
            samples.append((sid, rec.mesh_id))
            counts[rec.mesh_id] += 1
            sample_index += 1
    train_m, test_m = split_meshes(meshes, g.test_fraction, cfg.seed)
    split = {
        "train_meshes": train_m,
        "test_meshes": test_m,
        "train": [s for s, m in samples if m in set(train_m)],
        "test": [s for s, m in samples if m in set(test_m)],
    }
    (out / "split.json").write_text(json.dumps(split, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("wrote %d samples (%d train / %d test)", len(samples), len(split["train"]), len(split["test"]))
    return out, split
