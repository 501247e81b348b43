"""Metric aggregation and report files (CSV + readable table)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import cv2
import numpy as np

from ..datamodel import FixationPoint
from ..ingest.archive import ArchiveClip
from . import metrics

METRIC_NAMES = ("auc", "nss", "cc", "kl")


@dataclass
class VideoMetrics:
    """Frame-mean metrics for one video."""

    video_id: str
    n_frames: int = 0
    skipped: int = 0
    sums: dict[str, float] = field(default_factory=lambda: {m: 0.0 for m in METRIC_NAMES})
    counts: dict[str, int] = field(default_factory=lambda: {m: 0 for m in METRIC_NAMES})

    def add_frame(self, values: dict[str, Optional[float]]) -> None:
        self.n_frames += 1
        if all(values.get(m) is None for m in ("auc", "nss")):
            self.skipped += 1
        for m in METRIC_NAMES:
            v = values.get(m)
            if v is not None:
                self.sums[m] += v
                self.counts[m] += 1

    def mean(self, metric: str) -> Optional[float]:
        if self.counts[metric] == 0:
            return None
        return self.sums[metric] / self.counts[metric]


@dataclass
class MetricReport:
    """Per-video and aggregate frame-mean metrics.

    Aggregates weight every evaluated frame equally, regardless of how
    many fixations it carries.
    """

    videos: list[VideoMetrics] = field(default_factory=list)

    def aggregate(self) -> VideoMetrics:
        total = VideoMetrics(video_id="ALL")
        for v in self.videos:
            total.n_frames += v.n_frames
            total.skipped += v.skipped
            for m in METRIC_NAMES:
                total.sums[m] += v.sums[m]
                total.counts[m] += v.counts[m]
        return total

    def rows(self) -> list[VideoMetrics]:
        return self.videos + [self.aggregate()]

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["video", "frames", "skipped", *METRIC_NAMES])
            for row in self.rows():
                writer.writerow([
                    row.video_id, row.n_frames, row.skipped,
                    *[_fmt(row.mean(m)) for m in METRIC_NAMES],
                ])

    def table(self) -> str:
        header = f"{'video':<12} {'frames':>6} {'skip':>5} " + \
            " ".join(f"{m.upper():>8}" for m in METRIC_NAMES)
        lines = [header, "-" * len(header)]
        for row in self.rows():
            cells = " ".join(f"{_fmt(row.mean(m)):>8}" for m in METRIC_NAMES)
            lines.append(f"{row.video_id:<12} {row.n_frames:>6} {row.skipped:>5} {cells}")
        return "\n".join(lines)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def frame_metrics(pred: np.ndarray, gt_density: np.ndarray,
                  fixations: Sequence[FixationPoint]) -> dict[str, Optional[float]]:
    """All four metrics for one frame.

    The prediction is resampled (and renormalized) to the ground-truth
    resolution when the two differ, so models trained at desk scale can
    be scored against canonical ground truth.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt_density, dtype=np.float64)
    if pred.shape != gt.shape:
        pred = cv2.resize(pred, (gt.shape[1], gt.shape[0]), interpolation=cv2.INTER_LINEAR)
        total = pred.sum()
        pred = pred / total if total > 0 else np.full_like(gt, 1.0 / gt.size)
    return {
        "auc": metrics.auc_judd(pred, fixations),
        "nss": metrics.nss(pred, fixations),
        "cc": metrics.cc(pred, gt),
        "kl": metrics.kl_div(pred, gt),
    }


def evaluate_clip(pred_maps: np.ndarray, clip: ArchiveClip,
                  video: VideoMetrics) -> None:
    """Score one clip's predictions against its stored ground truth."""
    sample = clip.sample
    if pred_maps.shape[0] != sample.num_frames:
        raise ValueError(
            f"{clip.video_id} clip {clip.clip_index}: {pred_maps.shape[0]} predicted "
            f"frames vs {sample.num_frames} ground-truth frames")
    for t in range(sample.num_frames):
        video.add_frame(frame_metrics(
            pred_maps[t], sample.gt_density[t], sample.gt_fixations[t]))
