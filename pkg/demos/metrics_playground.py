"""Play with the evaluation metrics on masks you can reason about by hand.
Shows how the threshold sweep behaves, what the adaptive threshold picks,
and how each measure reacts to blur, shift and inversion."""

import numpy as np

from rgbdsod import metrics

H = W = 64
yy, xx = np.mgrid[0:H, 0:W]
gt = (((yy - 32) / 18.0) ** 2 + ((xx - 30) / 14.0) ** 2 <= 1.0)
gt = gt.astype(np.float64)

rng = np.random.default_rng(3)

candidates = {
    "exact": gt.copy(),
    "blurred": np.clip(gt + rng.normal(0, 0.15, gt.shape), 0, 1),
    "shifted": np.roll(gt, (6, 6), axis=(0, 1)),
    "faint": gt * 0.4,
    "inverted": 1.0 - gt,
    "uniform 0.5": np.full_like(gt, 0.5),
}

print("ground truth: %d foreground pixels of %d" % (int(gt.sum()), gt.size))
print()
header = "%-12s %7s %7s %7s %7s %7s %5s"
print(header % ("prediction", "mae", "s", "f_max", "f_adp", "e_max", "thr"))
for name, pred in candidates.items():
    scores = metrics.evaluate_pair(pred, gt, sample_id=name)
    level = metrics.adaptive_level(pred)
    print(header % (
        name,
        "%.4f" % scores.mae,
        "%.4f" % scores.s_measure,
        "%.4f" % scores.f_max,
        "%.4f" % scores.f_adaptive,
        "%.4f" % scores.e_max,
        "%d" % level,
    ))

print()
print("threshold sweep on the blurred map:")
precision, recall = metrics.pr_curve(candidates["blurred"], gt)
f_curve = metrics.f_measure(precision, recall)
for level in (0, 64, 128, 192, 255):
    print("  level %3d: precision %.4f recall %.4f f %.4f"
          % (level, precision[level], recall[level], f_curve[level]))
best = int(np.argmax(f_curve))
print("  best level %d with f %.4f" % (best, f_curve[best]))
