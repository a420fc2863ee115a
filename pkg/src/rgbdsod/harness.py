"""Study drivers: ablation table and refinement-step sweep.

Each variant gets its own run directory (train output, predicted maps,
metrics report) plus one summary CSV across variants."""

import dataclasses
from pathlib import Path

from . import data, metrics
from .config import ABLATION_FLAGS
from .model import build_model, count_parameters
from .predict import predict_directory
from .train import train

SUMMARY_COLUMNS = ("variant", "parameters", "s_measure", "f_max", "f_mean",
                   "f_adaptive", "e_max", "e_mean", "e_adaptive", "mae")


def _run_variant(tag, model_config, train_config, train_root, eval_root,
                 out_dir, quiet=True):
    run_dir = Path(out_dir) / tag
    manifest = data.load_manifest(train_root)
    ckpt = train(manifest, model_config, train_config, run_dir, quiet=quiet)
    pred_dir = run_dir / "maps"
    predict_directory(ckpt, eval_root, pred_dir,
                      batch_size=train_config.batch_size,
                      invert_depth=train_config.invert_depth,
                      workers=train_config.workers)
    report = metrics.evaluate_directory(pred_dir, Path(eval_root) / data.GT_DIR)
    metrics.write_report_json(report, run_dir / "report.json")
    metrics.write_per_image_csv(report, run_dir / "per_image.csv")
    metrics.write_curve_csv(report, run_dir / "curves.csv")
    return report


def _summary_row(tag, model_config, report):
    params = count_parameters(build_model(model_config))
    return {
        "variant": tag,
        "parameters": params,
        "s_measure": report.s_measure,
        "f_max": report.f_max,
        "f_mean": report.f_mean,
        "f_adaptive": report.f_adaptive,
        "e_max": report.e_max,
        "e_mean": report.e_mean,
        "e_adaptive": report.e_adaptive,
        "mae": report.mae,
    }


def write_summary_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in SUMMARY_COLUMNS:
                value = row[col]
                if value is None:
                    cells.append("")
                elif isinstance(value, float):
                    cells.append("%.6f" % value)
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")


def run_ablation(model_config, train_config, train_root, eval_root, out_dir,
                 variants=None, quiet=True):
    """Train and score the full model plus each single-flag removal.
    Returns the summary rows in table order."""
    if model_config.ablations:
        raise ValueError("ablation study starts from an unablated config")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = tuple(variants) if variants else ("full",) + ABLATION_FLAGS
    rows = []
    for tag in wanted:
        if tag == "full":
            variant_config = model_config
            name = "full"
        else:
            if tag not in ABLATION_FLAGS:
                raise ValueError("unknown ablation variant %r" % tag)
            variant_config = dataclasses.replace(model_config,
                                                 ablations=(tag,))
            name = "wo_%s" % tag
        report = _run_variant(name, variant_config, train_config, train_root,
                              eval_root, out_dir, quiet=quiet)
        rows.append(_summary_row(name, variant_config, report))
    write_summary_csv(rows, out_dir / "ablation_summary.csv")
    return rows


def run_step_sweep(model_config, train_config, train_root, eval_root,
                   out_dir, min_steps=1, max_steps=6, quiet=True):
    """Train and score one model per refinement-step count."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(min_steps, max_steps + 1):
        variant_config = dataclasses.replace(model_config, refine_steps=k)
        name = "k%d" % k
        report = _run_variant(name, variant_config, train_config, train_root,
                              eval_root, out_dir, quiet=quiet)
        rows.append(_summary_row(name, variant_config, report))
    write_summary_csv(rows, out_dir / "sweep_summary.csv")
    return rows
