"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import CheckpointError, ConfigError, MeshFormatError, MeshNotFound, NumericFailure, VcnError
from ..plyio import PlyError
from .complete import MaskError, cmd_complete
from .config import load_config
from .evaluate import cmd_eval
from .gen import cmd_gen, cmd_meshes
from .train import cmd_train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (or file for `complete`)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="vccomplete", description="Viewer-centred car completion pipeline.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("meshes", parents=[common], help="write procedural car meshes")
    m.add_argument("--count", type=int)
    sub.add_parser("gen", parents=[common], help="generate the dataset")
    t = sub.add_parser("train", parents=[common], help="train the network")
    t.add_argument("--checkpoint", help="resume from this checkpoint")
    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--checkpoint")
    e.add_argument("--min-points", type=int)
    e.add_argument("--split")
    e.add_argument("--postproc", choices=("none", "knn", "knn_db"))
    e.add_argument("--oracle", action="store_true", help="score ground-truth completions and poses")
    c = sub.add_parser("complete", parents=[common], help="replace masked objects by completions")
    c.add_argument("input", help="input .ply")
    c.add_argument("masks", help="JSON masks file")
    c.add_argument("--checkpoint", required=True)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed})
        if args.command == "meshes":
            cmd_meshes(cfg, args.count)
        elif args.command == "gen":
            cmd_gen(cfg, args.out)
        elif args.command == "train":
            cmd_train(cfg, args.checkpoint, args.out)
        elif args.command == "eval":
            if args.min_points is not None:
                cfg.eval.min_points = args.min_points
            if args.split:
                cfg.eval.split = args.split
            if args.postproc:
                cfg.eval.postproc = args.postproc
            if not args.oracle and not args.checkpoint:
                raise ConfigError("eval needs --checkpoint (or --oracle)")
            report = cmd_eval(cfg, args.checkpoint, args.out, args.oracle)
            print(json.dumps({k: v for k, v in report.items() if k != "buckets"}, sort_keys=True))
        elif args.command == "complete":
            if not args.out:
                raise ConfigError("complete needs --out <file.ply>")
            cmd_complete(cfg, args.input, args.masks, args.checkpoint, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"numeric failure (sample {exc.sample_id}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, MeshFormatError, MeshNotFound, PlyError, CheckpointError, MaskError, VcnError,
            ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
