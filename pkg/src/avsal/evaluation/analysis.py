"""Dataset analysis statistics: entropy, dispersion, landmark NSS,
contextual NSS and turn-taking gaze-transition times."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..datamodel import FaceTrack, FixationPoint, Landmarks, ValidationError
from .metrics import nss


def entropy_bits(dist: np.ndarray) -> float:
    """Shannon entropy in bits of a distribution-form map.

    Zero cells contribute nothing. Non-distribution input (negative
    values or sum far from 1) is rejected.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if np.any(dist < 0):
        raise ValidationError("entropy input contains negative values")
    total = float(dist.sum())
    if abs(total - 1.0) > 1e-5:
        raise ValidationError(f"entropy input sums to {total}, expected 1")
    p = dist[dist > 0]
    return float(-(p * np.log2(p)).sum())


def dispersion(fixations: Sequence[FixationPoint]) -> Optional[float]:
    """Mean pairwise Euclidean distance among fixation points.

    Undefined (None) for fewer than two fixations.
    """
    if len(fixations) < 2:
        return None
    pts = np.array([(fx.x, fx.y) for fx in fixations])
    total = 0.0
    count = 0
    for i in range(len(pts)):
        diffs = pts[i + 1:] - pts[i]
        total += float(np.sqrt((diffs ** 2).sum(axis=1)).sum())
        count += len(diffs)
    return total / count


def landmark_nss(saliency: np.ndarray, landmarks: Landmarks) -> dict[str, float]:
    """NSS of a map evaluated at each landmark group's points.

    Groups without points are left out of the result.
    """
    out: dict[str, float] = {}
    for group in Landmarks.GROUPS:
        pts = landmarks.group(group)
        if not pts:
            continue
        value = nss(saliency, [FixationPoint(x, y) for x, y in pts])
        if value is not None:
            out[group] = value
    return out


def contextual_nss(feature_map: np.ndarray,
                   fixations: Sequence[FixationPoint]) -> Optional[float]:
    """NSS with an arbitrary feature map (e.g. optical-flow magnitude)
    standing in for the saliency prediction."""
    return nss(feature_map, fixations)


def turn_events(tracks: Sequence[FaceTrack]) -> list[tuple[int, int]]:
    """Talking-onset events as (frame, face_id).

    An event is a frame where a face starts talking after being silent on
    the previous frame. Simultaneous onsets keep only the lowest face_id
    so each event names one new talker.
    """
    if not tracks:
        return []
    n_frames = len(tracks[0].talking)
    events = []
    for t in range(1, n_frames):
        onsets = sorted(tr.face_id for tr in tracks
                        if tr.talking[t] and not tr.talking[t - 1])
        if onsets:
            events.append((t, onsets[0]))
    return events


@dataclass
class TransitionStats:
    times: list[int] = field(default_factory=list)
    unreached: int = 0

    @property
    def n_events(self) -> int:
        return len(self.times) + self.unreached

    @property
    def mean(self) -> Optional[float]:
        if not self.times:
            return None
        return sum(self.times) / len(self.times)


def transition_times(
    fixations_per_frame: Sequence[Sequence[FixationPoint]],
    tracks: Sequence[FaceTrack],
    events: Optional[Sequence[tuple[int, int]]] = None,
) -> TransitionStats:
    """Frames from each talking onset until gaze settles on the new talker.

    For each event, the transition time is the number of frames until at
    least half of that frame's fixations fall inside the new talker's
    box; the search stops at the next event. Events where the 50% level
    is never reached are excluded from the mean but counted.
    """
    if events is None:
        events = turn_events(tracks)
    stats = TransitionStats()
    if not events:
        return stats
    by_id = {tr.face_id: tr for tr in tracks}
    n_frames = len(fixations_per_frame)
    for k, (start, face_id) in enumerate(events):
        cap = events[k + 1][0] if k + 1 < len(events) else n_frames
        track = by_id.get(face_id)
        reached = None
        for t in range(start, min(cap, n_frames)):
            box = track.boxes[t] if track is not None else None
            fixations = fixations_per_frame[t]
            if box is None or not fixations:
                continue
            inside = sum(1 for fx in fixations if box.contains(fx.x, fx.y))
            if inside * 2 >= len(fixations):
                reached = t - start
                break
        if reached is None:
            stats.unreached += 1
        else:
            stats.times.append(reached)
    return stats


@dataclass
class VideoAnalysis:
    """Findings-style statistics for one video."""

    video_id: str
    n_frames: int
    mean_entropy: Optional[float]
    mean_dispersion: Optional[float]
    dispersion_skipped: int
    landmark_nss: dict[str, float]
    transition: TransitionStats
    mean_contextual_nss: Optional[float] = None


def analyze_video(
    video_id: str,
    densities: np.ndarray,
    fixations_per_frame: Sequence[Sequence[FixationPoint]],
    tracks: Sequence[FaceTrack],
    flow_maps: Optional[np.ndarray] = None,
) -> VideoAnalysis:
    """Frame-mean statistics over one video's ground truth.

    densities is (T, H, W) in distribution form; flow_maps, when given,
    is (T, H, W) of flow magnitudes for contextual NSS.
    """
    t_frames = densities.shape[0]
    entropies = [entropy_bits(densities[t]) for t in range(t_frames)]

    disp_vals = []
    disp_skipped = 0
    for fixations in fixations_per_frame:
        d = dispersion(fixations)
        if d is None:
            disp_skipped += 1
        else:
            disp_vals.append(d)

    lm_sums: dict[str, list[float]] = {}
    for t in range(t_frames):
        for track in tracks:
            if track.landmarks and track.landmarks[t] is not None:
                for group, value in landmark_nss(densities[t], track.landmarks[t]).items():
                    lm_sums.setdefault(group, []).append(value)

    ctx = None
    if flow_maps is not None:
        vals = [contextual_nss(flow_maps[t], fixations_per_frame[t])
                for t in range(min(t_frames, flow_maps.shape[0]))]
        vals = [v for v in vals if v is not None]
        ctx = (sum(vals) / len(vals)) if vals else None

    return VideoAnalysis(
        video_id=video_id,
        n_frames=t_frames,
        mean_entropy=(sum(entropies) / len(entropies)) if entropies else None,
        mean_dispersion=(sum(disp_vals) / len(disp_vals)) if disp_vals else None,
        dispersion_skipped=disp_skipped,
        landmark_nss={g: sum(v) / len(v) for g, v in lm_sums.items()},
        transition=transition_times(fixations_per_frame, tracks),
        mean_contextual_nss=ctx,
    )


def concat_video(clips) -> tuple[np.ndarray, list, list[FaceTrack]]:
    """Stitch one video's archive clips back into whole-video sequences.

    Returns (densities (F, H, W), fixations per frame, face tracks over
    all F frames). Clips must belong to one video and are ordered by
    clip_index.
    """
    clips = sorted(clips, key=lambda c: c.clip_index)
    densities = np.concatenate([c.sample.gt_density for c in clips])
    fixations: list = []
    for c in clips:
        fixations.extend(c.sample.gt_fixations)

    ids = [tr.face_id for tr in clips[0].sample.face_tracks]
    tracks = []
    for fid in ids:
        boxes: list = []
        talking: list = []
        lms: list = []
        for c in clips:
            track = next(tr for tr in c.sample.face_tracks if tr.face_id == fid)
            boxes.extend(track.boxes)
            talking.extend(track.talking)
            lms.extend(track.landmarks if track.landmarks
                       else [None] * len(track.boxes))
        tracks.append(FaceTrack(fid, tuple(boxes), tuple(talking), tuple(lms)))
    return densities, fixations, tracks
