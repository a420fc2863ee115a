"""Supervision loss: binary cross entropy on every side output plus the
fine map, with the side terms scaled by a shared weight."""

from dataclasses import dataclass, field

import torch

CLAMP_EPS = 1e-7


def bce_loss(pred, target, eps=CLAMP_EPS):
    """Pixel-mean binary cross entropy. pred must already be in [0, 1];
    values are clamped to (eps, 1 - eps) before the logs."""
    if pred.shape != target.shape:
        raise ValueError(
            "prediction shape %s does not match target shape %s"
            % (tuple(pred.shape), tuple(target.shape))
        )
    p = torch.clamp(pred, eps, 1.0 - eps)
    term = target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)
    return -term.mean()


@dataclass
class LossBreakdown:
    """total = fine + weight * sum(coarse). fine is a zero scalar with
    has_fine False when the fine branch is absent, coarse is empty when
    side supervision is off."""

    fine: torch.Tensor
    coarse: list = field(default_factory=list)
    weight: float = 0.99
    total: torch.Tensor = None
    has_fine: bool = True

    def term_count(self):
        return len(self.coarse) + (1 if self.has_fine else 0)

    def scalars(self):
        return {
            "total": float(self.total.detach()),
            "fine": float(self.fine.detach()),
            "coarse": [float(c.detach()) for c in self.coarse],
        }


def supervision_loss(prediction, target, weight=0.99):
    """Compose the training loss from a SaliencyPrediction. target is the
    binary ground truth with the same shape as every map."""
    coarse_terms = [bce_loss(s, target) for s in prediction.coarse]
    if prediction.fine is not None:
        fine_term = bce_loss(prediction.fine, target)
        has_fine = True
    else:
        if not coarse_terms:
            raise ValueError("prediction holds no maps to supervise")
        fine_term = torch.zeros((), dtype=coarse_terms[0].dtype,
                                device=coarse_terms[0].device)
        has_fine = False
    total = fine_term
    if coarse_terms:
        total = total + weight * torch.stack(coarse_terms).sum()
    return LossBreakdown(fine=fine_term, coarse=coarse_terms, weight=weight,
                         total=total, has_fine=has_fine)
