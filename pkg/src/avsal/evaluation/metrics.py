"""Saliency evaluation metrics: NSS, CC, AUC-Judd and KL.

Frames a metric cannot be computed on (no fixations) return None so
callers can skip-and-count them; degenerate-but-defined cases (constant
maps) return the conventional values (NSS 0, CC 0, AUC 0.5).
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch

from ..datamodel import FixationPoint
from ..training.losses import kl_divergence


def _fixation_values(saliency: np.ndarray, fixations: Sequence[FixationPoint]) -> np.ndarray:
    h, w = saliency.shape
    out = []
    for fx in fixations:
        x, y = int(fx.x), int(fx.y)
        if 0 <= x < w and 0 <= y < h:
            out.append(saliency[y, x])
    return np.asarray(out, dtype=np.float64)


def nss(saliency: np.ndarray, fixations: Sequence[FixationPoint]) -> Optional[float]:
    """Normalized Scanpath Saliency: mean z-scored value at fixations.

    The map is z-scored over all pixels (population std); a constant map
    scores 0. Returns None when there are no fixations to evaluate.
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    values = _fixation_values(saliency, fixations)
    if values.size == 0:
        return None
    std = saliency.std()
    if std == 0:
        return 0.0
    return float((values - saliency.mean()).mean() / std)


def cc(saliency: np.ndarray, gt: np.ndarray) -> float:
    """Pearson correlation between two maps; 0 if either is constant."""
    saliency = np.asarray(saliency, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if saliency.shape != gt.shape:
        raise ValueError(f"shape mismatch: {saliency.shape} vs {gt.shape}")
    a = saliency - saliency.mean()
    b = gt - gt.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return 0.0
    return float((a * b).sum() / denom)


def auc_judd(saliency: np.ndarray, fixations: Sequence[FixationPoint]) -> Optional[float]:
    """AUC with fixated pixels as positives and all pixels as the pool.

    The ROC is swept over the saliency values at the fixated pixels: at
    each threshold, TPR = fraction of fixations with value >= threshold
    and FPR = fraction of all pixels with value >= threshold. (0,0) and
    (1,1) anchor the curve; the area is trapezoidal. Returns None with no
    fixations.
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    values = _fixation_values(saliency, fixations)
    if values.size == 0:
        return None
    flat = saliency.ravel()
    n_pixels = flat.size
    n_fix = values.size
    points = [(0.0, 0.0), (1.0, 1.0)]
    for thresh in values:
        tpr = float((values >= thresh).sum()) / n_fix
        fpr = float((flat >= thresh).sum()) / n_pixels
        points.append((fpr, tpr))
    points.sort()
    fprs = np.array([p[0] for p in points])
    tprs = np.array([p[1] for p in points])
    return float(np.trapezoid(tprs, fprs))


def kl_div(saliency: np.ndarray, gt: np.ndarray) -> float:
    """KL(G || S) on a single pair of distribution maps.

    Shares the training-loss implementation, so the evaluated metric is
    exactly the optimized objective.
    """
    return float(kl_divergence(
        torch.from_numpy(np.asarray(saliency, dtype=np.float64)),
        torch.from_numpy(np.asarray(gt, dtype=np.float64))))
