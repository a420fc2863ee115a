"""Command line front end.

Subcommands: train, predict, evaluate, ablate, sweep-k. The data root can
come from --data or from the RGBDSOD_DATA_ROOT environment variable. A
JSON config file provides defaults that individual flags override; the
effective config is echoed into every output directory.
"""

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import data, metrics
from .config import (ModelConfig, TrainConfig, load_config_file,
                     save_config_file)
from .harness import run_ablation, run_step_sweep
from .predict import predict_directory
from .train import TrainingDiverged, train

DATA_ROOT_ENV = "RGBDSOD_DATA_ROOT"


def _data_root(args):
    root = getattr(args, "data", None) or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise SystemExit(
            "no data root given, pass --data or set %s" % DATA_ROOT_ENV
        )
    return root


def _load_configs(args):
    if getattr(args, "config", None):
        model_config, train_config = load_config_file(args.config)
    else:
        model_config, train_config = ModelConfig(), TrainConfig()
    model_over = {}
    for flag, name in (("seed", "seed"), ("k", "refine_steps"),
                       ("width_scale", "width_scale")):
        value = getattr(args, flag, None)
        if value is not None:
            model_over[name] = value
    ablate = getattr(args, "ablate", None)
    if ablate:
        flags = tuple(f.strip() for f in ablate.split(",") if f.strip())
        model_over["ablations"] = flags
    if model_over:
        model_config = dataclasses.replace(model_config, **model_over)
    train_over = {}
    for flag in ("epochs", "batch_size", "lr"):
        value = getattr(args, flag, None)
        if value is not None:
            train_over[flag] = value
    if getattr(args, "invert_depth", False):
        train_over["invert_depth"] = True
    if train_over:
        train_config = dataclasses.replace(train_config, **train_over)
    return model_config, train_config


def _add_common(parser, with_model_flags=True):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    if with_model_flags:
        parser.add_argument("--seed", type=int)
        parser.add_argument("--k", type=int,
                            help="refinement steps, 1..6")
        parser.add_argument("--width-scale", dest="width_scale", type=float)
        parser.add_argument("--ablate",
                            help="comma list of flags to remove, e.g. CA,SA")
        parser.add_argument("--epochs", type=int)
        parser.add_argument("--batch-size", dest="batch_size", type=int)
        parser.add_argument("--lr", type=float)
        parser.add_argument("--invert-depth", dest="invert_depth",
                            action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rgbdsod",
        description="RGB-D salient object detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", help="dataset root (rgb/, depth/, gt/)")
    p.add_argument("--resume", help="checkpoint to continue from")
    _add_common(p)

    p = sub.add_parser("predict", help="write saliency maps for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="dataset root (rgb/, depth/)")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=8)
    p.add_argument("--invert-depth", dest="invert_depth",
                   action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score predictions against masks")
    p.add_argument("--pred", required=True, help="directory of saliency maps")
    p.add_argument("--gt", help="directory of ground-truth masks; defaults "
                   "to <data root>/gt")
    p.add_argument("--data")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="component removal study")
    p.add_argument("--data", help="training dataset root")
    p.add_argument("--eval-data", dest="eval_data",
                   help="evaluation dataset root, defaults to --data")
    p.add_argument("--variants",
                   help="comma list from full,CR,CA,SA,ASPP,FR,FA,SC")
    _add_common(p)

    p = sub.add_parser("sweep-k", help="refinement step sweep")
    p.add_argument("--data")
    p.add_argument("--eval-data", dest="eval_data")
    p.add_argument("--min-k", dest="min_k", type=int, default=1)
    p.add_argument("--max-k", dest="max_k", type=int, default=6)
    _add_common(p)

    return parser


def cmd_train(args):
    model_config, train_config = _load_configs(args)
    root = _data_root(args)
    manifest = data.load_manifest(root)
    for issue in manifest.issues:
        print("warning: %s" % issue, file=sys.stderr)
    ckpt = train(manifest, model_config, train_config, args.out,
                 resume=args.resume, quiet=False)
    print("final checkpoint: %s" % ckpt)
    return 0


def cmd_predict(args):
    root = _data_root(args)
    written = predict_directory(
        args.checkpoint, root, args.out, batch_size=args.batch_size,
        invert_depth=args.invert_depth,
    )
    print("wrote %d maps to %s" % (len(written), args.out))
    return 0


def cmd_evaluate(args):
    gt_dir = args.gt
    if gt_dir is None:
        gt_dir = str(Path(_data_root(args)) / data.GT_DIR)
    report = metrics.evaluate_directory(args.pred, gt_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_report_json(report, out / "report.json")
    metrics.write_per_image_csv(report, out / "per_image.csv")
    metrics.write_curve_csv(report, out / "curves.csv")
    for sample_id, reason in report.skipped:
        print("skipped %s: %s" % (sample_id, reason), file=sys.stderr)
    summary = ["mae %.4f" % report.mae, "s %.4f" % report.s_measure]
    if report.f_max is not None:
        summary += ["f_max %.4f" % report.f_max, "e_max %.4f" % report.e_max]
    print(", ".join(summary))
    return 0


def cmd_ablate(args):
    model_config, train_config = _load_configs(args)
    root = _data_root(args)
    eval_root = args.eval_data or root
    variants = None
    if args.variants:
        variants = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config_file(out / "config.json", model_config, train_config)
    rows = run_ablation(model_config, train_config, root, eval_root, out,
                        variants=variants, quiet=False)
    print("wrote %s" % (out / "ablation_summary.csv"))
    for row in rows:
        print("%-12s params %d" % (row["variant"], row["parameters"]))
    return 0


def cmd_sweep_k(args):
    model_config, train_config = _load_configs(args)
    root = _data_root(args)
    eval_root = args.eval_data or root
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config_file(out / "config.json", model_config, train_config)
    run_step_sweep(model_config, train_config, root, eval_root, out,
                   min_steps=args.min_k, max_steps=args.max_k, quiet=False)
    print("wrote %s" % (out / "sweep_summary.csv"))
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "sweep-k": cmd_sweep_k,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except TrainingDiverged as exc:
        print("training diverged: %s" % exc, file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
