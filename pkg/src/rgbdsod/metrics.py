"""Saliency evaluation suite on numpy arrays.

Predictions are float maps in [0, 1], ground truth is strictly binary.
Threshold sweeps binarize at the 256 integer levels t in 0..255 with the
rule (s * 255 >= t). Conventions, fixed here once for the whole suite:

* precision of an empty binarized prediction is 0
* F with precision = recall = 0 is 0, beta squared defaults to 0.3
* images whose ground truth has no foreground get no P/R/F scores; they
  are listed as skipped and still scored for MAE, S and E
* the adaptive threshold level is round(min(2 * mean(s), 1) * 255)
* E uses the mean over all pixels of the enhanced alignment matrix, with
  the usual all-foreground / all-background conventions
* aggregate MAE/S and the mean/adaptive variants of F and E average the
  per-image values; the max variants are the maximum of the aggregate
  curve
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import IMAGE_EXTENSIONS, _read_gray, resize_bilinear

NUM_THRESHOLDS = 256
THRESHOLDS = np.arange(NUM_THRESHOLDS)
BETA_SQ = 0.3
ALIGN_EPS = 1e-8
_EPS = np.spacing(1)


class EmptyGroundTruthError(ValueError):
    """Raised by P/R operations when the ground truth has no foreground."""


def validate_pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(
            "prediction shape %s does not match gt shape %s"
            % (pred.shape, gt.shape)
        )
    if pred.size == 0:
        raise ValueError("empty maps cannot be scored")
    if not np.isfinite(pred).all():
        raise ValueError("prediction contains non-finite values")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise ValueError("prediction values must lie in [0, 1]")
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValueError("ground truth must be strictly binary")
    return pred, gt


def binarize(pred, level):
    return pred * 255.0 >= level


def _sweep_counts(pred, gt):
    """Counts per threshold level: selected pixels and true positives.
    Comparing x >= t for integer t equals comparing floor(x) >= t, so a
    reverse cumulative histogram reproduces the sweep exactly."""
    levels = np.clip(np.floor(pred * 255.0).astype(np.int64), 0, 255)
    hist_all = np.bincount(levels.ravel(), minlength=NUM_THRESHOLDS)
    hist_fg = np.bincount(levels[gt > 0.5].ravel(), minlength=NUM_THRESHOLDS)
    selected = np.cumsum(hist_all[::-1])[::-1]
    true_pos = np.cumsum(hist_fg[::-1])[::-1]
    return selected, true_pos


def precision_recall(pred, gt, level):
    """P and R at one threshold level. Empty ground truth is undefined and
    raises EmptyGroundTruthError."""
    pred, gt = validate_pair(pred, gt)
    n_gt = int(gt.sum())
    if n_gt == 0:
        raise EmptyGroundTruthError("ground truth has no foreground pixels")
    mask = binarize(pred, level)
    n_sel = int(mask.sum())
    tp = int(np.logical_and(mask, gt > 0.5).sum())
    precision = tp / n_sel if n_sel > 0 else 0.0
    recall = tp / n_gt
    return precision, recall


def pr_curve(pred, gt):
    """Precision and recall at each of the 256 threshold levels."""
    pred, gt = validate_pair(pred, gt)
    n_gt = int(gt.sum())
    if n_gt == 0:
        raise EmptyGroundTruthError("ground truth has no foreground pixels")
    selected, true_pos = _sweep_counts(pred, gt)
    precision = np.where(selected > 0, true_pos / np.maximum(selected, 1), 0.0)
    recall = true_pos / n_gt
    return precision, recall


def f_measure(precision, recall, beta_sq=BETA_SQ):
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    denom = beta_sq * precision + recall
    out = np.where(denom > 0,
                   (1.0 + beta_sq) * precision * recall / np.where(denom > 0, denom, 1.0),
                   0.0)
    return out if out.ndim else float(out)


def adaptive_level(pred):
    """Integer threshold level for twice the mean saliency, capped at 1."""
    pred = np.asarray(pred, dtype=np.float64)
    return int(np.round(min(2.0 * pred.mean(), 1.0) * 255.0))


def mae(pred, gt):
    pred, gt = validate_pair(pred, gt)
    return float(np.abs(pred - gt).mean())


def _ssim_block(pred, gt):
    n = pred.size
    if n == 0:
        return 0.0
    x = pred.mean()
    y = gt.mean()
    sigma_x = ((pred - x) ** 2).sum() / (n - 1 + _EPS)
    sigma_y = ((gt - y) ** 2).sum() / (n - 1 + _EPS)
    sigma_xy = ((pred - x) * (gt - y)).sum() / (n - 1 + _EPS)
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0:
        return alpha / (beta + _EPS)
    if beta == 0:
        return 1.0
    return 0.0


def _object_score(values):
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _s_object(pred, gt):
    fg = pred[gt > 0.5]
    bg = (1.0 - pred)[gt <= 0.5]
    u = gt.mean()
    return u * _object_score(fg) + (1.0 - u) * _object_score(bg)


def _s_region(pred, gt):
    h, w = gt.shape
    rows, cols = np.argwhere(gt > 0.5).mean(axis=0)
    cy = int(np.round(rows)) + 1
    cx = int(np.round(cols)) + 1
    total = h * w
    score = 0.0
    for rs, cs in ((slice(0, cy), slice(0, cx)), (slice(0, cy), slice(cx, w)),
                   (slice(cy, h), slice(0, cx)), (slice(cy, h), slice(cx, w))):
        gt_block = gt[rs, cs]
        weight = gt_block.size / total
        score += weight * _ssim_block(pred[rs, cs], gt_block)
    return score


def s_measure(pred, gt, alpha=0.5):
    """Structural similarity between a saliency map and a binary mask.
    Empty ground truth scores 1 - mean(pred), full ground truth scores
    mean(pred)."""
    pred, gt = validate_pair(pred, gt)
    y = gt.mean()
    if y == 0.0:
        return float(1.0 - pred.mean())
    if y == 1.0:
        return float(pred.mean())
    score = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return float(max(score, 0.0))


def _enhanced_from_counts(n, n_gt, n_sel, tp):
    """Mean enhanced alignment for a binarized prediction described by its
    pixel counts. Scalars or per-threshold arrays both work."""
    n_sel = np.asarray(n_sel, dtype=np.float64)
    tp = np.asarray(tp, dtype=np.float64)
    if n_gt == 0:
        return (n - n_sel) / n
    if n_gt == n:
        return n_sel / n
    mu_g = n_gt / n
    mu_s = n_sel / n
    phi_g = (1.0 - mu_g, -mu_g)
    phi_s = (1.0 - mu_s, -mu_s)
    counts = (tp, n_sel - tp, n_gt - tp, n - n_sel - n_gt + tp)
    pairs = ((phi_g[0], phi_s[0]), (phi_g[1], phi_s[0]),
             (phi_g[0], phi_s[1]), (phi_g[1], phi_s[1]))
    acc = np.zeros_like(n_sel)
    for count, (pg, ps) in zip(counts, pairs):
        align = 2.0 * pg * ps / (pg * pg + ps * ps + ALIGN_EPS)
        acc = acc + count * (1.0 + align) ** 2 / 4.0
    return acc / n


def e_measure(pred, gt, level):
    """Enhanced-alignment score of the prediction binarized at one level."""
    pred, gt = validate_pair(pred, gt)
    n = gt.size
    n_gt = int(gt.sum())
    mask = binarize(pred, level)
    n_sel = int(mask.sum())
    tp = int(np.logical_and(mask, gt > 0.5).sum())
    return float(_enhanced_from_counts(n, n_gt, n_sel, tp))


def e_measure_curve(pred, gt):
    pred, gt = validate_pair(pred, gt)
    n = gt.size
    n_gt = int(gt.sum())
    selected, true_pos = _sweep_counts(pred, gt)
    if n_gt == 0:
        return (n - selected.astype(np.float64)) / n
    if n_gt == n:
        return selected.astype(np.float64) / n
    return _enhanced_from_counts(n, n_gt, selected, true_pos)


@dataclass
class ImageScores:
    sample_id: str
    mae: float
    s_measure: float
    e_max: float
    e_mean: float
    e_adaptive: float
    f_max: float = None
    f_mean: float = None
    f_adaptive: float = None
    precision: np.ndarray = None
    recall: np.ndarray = None
    e_curve: np.ndarray = None
    skip_reason: str = None

    @property
    def skipped(self):
        return self.skip_reason is not None


def evaluate_pair(pred, gt, sample_id=""):
    """All per-image scores for one (prediction, ground truth) pair."""
    pred, gt = validate_pair(pred, gt)
    n_gt = int(gt.sum())
    level = adaptive_level(pred)
    e_curve = e_measure_curve(pred, gt)
    scores = ImageScores(
        sample_id=sample_id,
        mae=mae(pred, gt),
        s_measure=s_measure(pred, gt),
        e_max=float(e_curve.max()),
        e_mean=float(e_curve.mean()),
        e_adaptive=e_measure(pred, gt, level),
        e_curve=e_curve,
    )
    if n_gt == 0:
        scores.skip_reason = "ground truth has no foreground"
        return scores
    precision, recall = pr_curve(pred, gt)
    f_curve = f_measure(precision, recall)
    p_adp, r_adp = precision_recall(pred, gt, level)
    scores.precision = precision
    scores.recall = recall
    scores.f_max = float(f_curve.max())
    scores.f_mean = float(f_curve.mean())
    scores.f_adaptive = float(f_measure(p_adp, r_adp))
    return scores


@dataclass
class MetricsReport:
    """Dataset-level aggregates plus the per-image rows they came from.
    precision/recall/f_curve aggregate only the images with usable ground
    truth; e_curve averages every image."""

    mae: float = None
    s_measure: float = None
    f_max: float = None
    f_mean: float = None
    f_adaptive: float = None
    e_max: float = None
    e_mean: float = None
    e_adaptive: float = None
    precision: np.ndarray = None
    recall: np.ndarray = None
    f_curve: np.ndarray = None
    e_curve: np.ndarray = None
    per_image: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def to_dict(self, include_curves=True):
        doc = {
            "aggregate": {
                "count": len(self.per_image),
                "mae": self.mae,
                "s_measure": self.s_measure,
                "f_max": self.f_max,
                "f_mean": self.f_mean,
                "f_adaptive": self.f_adaptive,
                "e_max": self.e_max,
                "e_mean": self.e_mean,
                "e_adaptive": self.e_adaptive,
            },
            "skipped": [{"sample_id": s, "reason": r} for s, r in self.skipped],
            "per_image": [
                {
                    "sample_id": s.sample_id,
                    "mae": s.mae,
                    "s_measure": s.s_measure,
                    "f_max": s.f_max,
                    "f_mean": s.f_mean,
                    "f_adaptive": s.f_adaptive,
                    "e_max": s.e_max,
                    "e_mean": s.e_mean,
                    "e_adaptive": s.e_adaptive,
                }
                for s in self.per_image
            ],
        }
        if include_curves and self.precision is not None:
            doc["curve"] = {
                "threshold": THRESHOLDS.tolist(),
                "precision": list(self.precision),
                "recall": list(self.recall),
                "f_measure": list(self.f_curve),
                "e_measure": list(self.e_curve),
            }
        return doc


def aggregate_scores(per_image):
    """Fold per-image scores into a MetricsReport."""
    report = MetricsReport(per_image=list(per_image))
    if not report.per_image:
        raise ValueError("nothing to aggregate")
    report.skipped = [(s.sample_id, s.skip_reason) for s in report.per_image
                      if s.skipped]
    report.mae = float(np.mean([s.mae for s in report.per_image]))
    report.s_measure = float(np.mean([s.s_measure for s in report.per_image]))
    report.e_mean = float(np.mean([s.e_mean for s in report.per_image]))
    report.e_adaptive = float(np.mean([s.e_adaptive for s in report.per_image]))
    report.e_curve = np.mean([s.e_curve for s in report.per_image], axis=0)
    report.e_max = float(report.e_curve.max())
    scored = [s for s in report.per_image if not s.skipped]
    if scored:
        report.precision = np.mean([s.precision for s in scored], axis=0)
        report.recall = np.mean([s.recall for s in scored], axis=0)
        report.f_curve = np.asarray(
            f_measure(report.precision, report.recall))
        report.f_max = float(report.f_curve.max())
        report.f_mean = float(np.mean([s.f_mean for s in scored]))
        report.f_adaptive = float(np.mean([s.f_adaptive for s in scored]))
    return report


def _list_gray_files(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError("directory %s does not exist" % directory)
    files = {p.stem: p for p in sorted(directory.iterdir())
             if p.suffix.lower() in IMAGE_EXTENSIONS}
    if not files:
        raise ValueError("no images under %s" % directory)
    return files


def load_gray_map(path):
    arr, scale = _read_gray(path)
    return np.clip(arr / scale, 0.0, 1.0)


def load_binary_map(path):
    arr, scale = _read_gray(path)
    return (arr / scale >= 0.5).astype(np.float64)


def evaluate_directory(pred_dir, gt_dir, workers=0):
    """Score every name-matched (prediction, ground truth) file pair.
    Predictions are resized to the ground-truth resolution first. Both
    directories must cover exactly the same sample ids."""
    preds = _list_gray_files(pred_dir)
    gts = _list_gray_files(gt_dir)
    missing_pred = sorted(set(gts) - set(preds))
    missing_gt = sorted(set(preds) - set(gts))
    if missing_pred or missing_gt:
        raise ValueError(
            "unmatched files, no prediction for %r, no ground truth for %r"
            % (missing_pred[:5], missing_gt[:5])
        )

    def _score(sample_id):
        gt = load_binary_map(gts[sample_id])
        pred = load_gray_map(preds[sample_id])
        if pred.shape != gt.shape:
            pred = np.clip(resize_bilinear(pred, gt.shape), 0.0, 1.0)
        return evaluate_pair(pred.astype(np.float64), gt, sample_id)

    ids = sorted(gts)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(_score, ids))
    else:
        scored = [_score(i) for i in ids]
    scored.sort(key=lambda s: s.sample_id)
    return aggregate_scores(scored)


def write_report_json(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_per_image_csv(report, path):
    columns = ["sample_id", "mae", "s_measure", "f_max", "f_mean",
               "f_adaptive", "e_max", "e_mean", "e_adaptive", "skip_reason"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for s in report.per_image:
            row = [s.sample_id]
            for name in columns[1:-1]:
                value = getattr(s, name)
                row.append("" if value is None else "%.8f" % value)
            row.append(s.skip_reason or "")
            fh.write(",".join(row) + "\n")


def write_curve_csv(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,precision,recall,f_measure,e_measure\n")
        for t in range(NUM_THRESHOLDS):
            p = report.precision[t] if report.precision is not None else ""
            r = report.recall[t] if report.recall is not None else ""
            f = report.f_curve[t] if report.f_curve is not None else ""
            e = report.e_curve[t]
            fh.write("%d,%s,%s,%s,%.8f\n" % (
                t,
                "" if p == "" else "%.8f" % p,
                "" if r == "" else "%.8f" % r,
                "" if f == "" else "%.8f" % f,
                e,
            ))
