"""Run configuration loaded from YAML; every field has a default."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..lidarsim import DEFAULT_BINS, DEFAULT_POINT_STRIDES, DEFAULT_RING_STRIDES
from ..postproc import PostprocConfig
from ..vcn.network import VcnConfig


@dataclass
class GenConfig:
    mesh_dir: str = "meshes"
    procedural_meshes: int = 0  # written by the ``meshes`` subcommand
    n_views: int = 26
    n_points: int = 16384
    surface_grid: int = 64
    views_per_model: int = 10
    max_scenes: int = 2000
    cars_per_scene: tuple = (3, 8)
    poles_per_scene: tuple = (2, 6)
    range_m: tuple = (5.0, 60.0)
    dim_scale: tuple = (0.9, 1.1)
    sensor_height: float = 1.8
    ray_res_deg: tuple = (0.05, 0.05)  # vertical, horizontal
    vfov_deg: tuple = (-25.0, 15.0)
    hfov_deg: tuple = (-180.0, 180.0)
    min_points: int = 1
    include_ground: bool = False
    lidar_sim: bool = True
    lidar_bins: tuple = DEFAULT_BINS
    ring_strides: tuple = DEFAULT_RING_STRIDES
    point_strides: tuple = DEFAULT_POINT_STRIDES
    test_fraction: float = 0.2


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    checkpoint_every: int = 500
    partial: str = "partial"  # "partial" (scan-simulated) or "dense"
    split: str = "train"
    max_samples: int | None = None
    min_points: int = 1
    init_seed: int | None = None


@dataclass
class EvalConfig:
    split: str = "test"
    min_points: int = 30
    postproc: str = "none"  # none | knn | knn_db
    outlier_fraction: float = 0.0
    outlier_extent: float = 5.0


@dataclass
class RunConfig:
    seed: int = 0
    dataset_dir: str = "data"
    run_dir: str = "run"
    gen: GenConfig = field(default_factory=GenConfig)
    vcn: VcnConfig = field(default_factory=VcnConfig)
    postproc: PostprocConfig = field(default_factory=PostprocConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    base_dir: str = "."

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        d = _plain(asdict(self))
        d.pop("base_dir", None)
        return d


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
        default = known[key].default_factory() if callable(known[key].default_factory) else known[key].default
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, f"{where}.{key}")
        elif isinstance(default, tuple) and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    data = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = _build(RunConfig, data, "config")
    cfg.base_dir = str(base)
    if cfg.train.batch_size < 1 or cfg.train.steps < 0:
        raise ConfigError("train.batch_size must be >= 1 and steps >= 0")
    if cfg.train.partial not in ("partial", "dense"):
        raise ConfigError("train.partial must be 'partial' or 'dense'")
    if cfg.eval.postproc not in ("none", "knn", "knn_db"):
        raise ConfigError("eval.postproc must be none, knn or knn_db")
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
