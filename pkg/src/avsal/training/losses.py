"""The KL-divergence training objective.

One implementation serves both training and evaluation so the loss the
optimizer sees and the metric reported afterwards can never drift apart.
"""
from __future__ import annotations

import torch

KL_EPS = 1e-7


def kl_divergence(pred: torch.Tensor, gt: torch.Tensor,
                  eps: float = KL_EPS) -> torch.Tensor:
    """KL(G || S) between per-frame spatial distributions, natural log.

    pred (S) and gt (G) are (..., H, W) maps that each sum to 1 over their
    last two dimensions. The prediction is clamped below at ``eps`` and
    renormalized before the log ratio; ground-truth zeros contribute
    nothing (0 * log 0 = 0). Summed over pixels, averaged over all
    leading dimensions.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs gt {tuple(gt.shape)}")
    s = pred.clamp_min(eps)
    s = s / s.sum(dim=(-2, -1), keepdim=True)
    # log(gt) is evaluated on a copy with zeros replaced by 1 so the
    # gt == 0 branch never produces inf, while positive entries keep
    # their exact logarithm.
    safe_gt = torch.where(gt > 0, gt, torch.ones_like(gt))
    ratio = torch.where(gt > 0, gt * (torch.log(safe_gt) - torch.log(s)),
                        torch.zeros_like(gt))
    per_frame = ratio.sum(dim=(-2, -1))
    return per_frame.mean()
