"""Pipeline driver: dataset generation, training, evaluation and scene augmentation."""

from .config import EvalConfig, GenConfig, RunConfig, TrainConfig, load_config
from .complete import cmd_complete
from .evaluate import cmd_eval
from .gen import cmd_gen, cmd_meshes
from .train import cmd_train

__all__ = ["EvalConfig", "GenConfig", "RunConfig", "TrainConfig", "load_config", "cmd_complete", "cmd_eval",
           "cmd_gen", "cmd_meshes", "cmd_train"]
