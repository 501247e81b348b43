"""Fixation maps and face-attention weights derived from gaze data."""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
import scipy.ndimage

from ..datamodel import Box, FixationPoint


def fixation_density(
    fixations: Sequence[FixationPoint],
    shape: tuple[int, int],
    sigma: Optional[float] = None,
) -> np.ndarray:
    """Continuous gaze-density map from discrete fixation points.

    Each fixation stamps a 1 at its pixel; the grid is then blurred with
    an isotropic Gaussian (sigma defaults to width / 16, roughly one
    degree of visual angle) and renormalized to sum to 1. With no
    fixations the density is uniform.
    """
    h, w = shape
    if sigma is None:
        sigma = w / 16.0
    grid = np.zeros((h, w), dtype=np.float64)
    for fx in fixations:
        x, y = int(fx.x), int(fx.y)
        if 0 <= x < w and 0 <= y < h:
            grid[y, x] += 1.0
    if grid.sum() == 0.0:
        return np.full((h, w), 1.0 / (h * w))
    blurred = scipy.ndimage.gaussian_filter(grid, sigma=sigma, mode="constant")
    return blurred / blurred.sum()


def fixation_map(fixations: Sequence[FixationPoint], shape: tuple[int, int]) -> np.ndarray:
    """Binary fixation map: 1 at every fixated pixel, 0 elsewhere."""
    h, w = shape
    grid = np.zeros((h, w), dtype=np.float64)
    for fx in fixations:
        x, y = int(fx.x), int(fx.y)
        if 0 <= x < w and 0 <= y < h:
            grid[y, x] = 1.0
    return grid


def gt_face_weights(
    fixations: Sequence[FixationPoint],
    boxes: Sequence[Optional[Box]],
) -> tuple[Optional[np.ndarray], bool]:
    """Ground-truth attention share of each face on one frame.

    A fixation is assigned to the face whose box contains it; if several
    boxes contain it, the smallest box (by area) wins. Fixations landing
    on no face are ignored. Returns (weights, supervised):

    * weights sums to exactly 1.0 over present faces (absent faces get 0);
      dyadic shares such as 1/2 or 3/4 come out exact.
    * supervised is False when no fixation hits any face — the frame then
      carries no face-attention signal and weights is None.
    """
    n = len(boxes)
    counts = np.zeros(n, dtype=np.int64)
    for fx in fixations:
        best = -1
        best_area = math.inf
        for i, box in enumerate(boxes):
            if box is not None and box.contains(fx.x, fx.y) and box.area < best_area:
                best, best_area = i, box.area
        if best >= 0:
            counts[best] += 1

    total = int(counts.sum())
    if total == 0:
        return None, False

    weights = counts / total
    # Largest-remainder touch-up so the float sum is exactly 1.0.
    err = 1.0 - float(weights.sum())
    if err != 0.0:
        weights[int(np.argmax(counts))] += err
    return weights, True
