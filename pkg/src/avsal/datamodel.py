"""Core data types shared by ingestion, the network, and evaluation.

Everything lives in the pixel space of the canonical square frame (256x256
by default); original-resolution annotations are rescaled at ingest. All
types are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DISTRIBUTION_TOL = 1e-6
DENSITY_TOL = 1e-5

Point = tuple[float, float]


class ValidationError(ValueError):
    """Raised when a value violates a datamodel invariant."""


def _frozen_array(values, dtype=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned face box in pixel coordinates (x, y = top-left corner)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def center(self) -> Point:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h

    def scaled(self, sx: float, sy: float) -> "Box":
        return Box(self.x * sx, self.y * sy, self.w * sx, self.h * sy)


@dataclass(frozen=True)
class Landmarks:
    """Facial landmark points grouped by region."""

    eyes: tuple[Point, ...] = ()
    nose: tuple[Point, ...] = ()
    mouth: tuple[Point, ...] = ()

    GROUPS = ("eyes", "nose", "mouth")

    def group(self, name: str) -> tuple[Point, ...]:
        if name not in self.GROUPS:
            raise KeyError(f"unknown landmark group {name!r}")
        return getattr(self, name)

    def scaled(self, sx: float, sy: float) -> "Landmarks":
        def sc(pts):
            return tuple((x * sx, y * sy) for x, y in pts)

        return Landmarks(eyes=sc(self.eyes), nose=sc(self.nose), mouth=sc(self.mouth))


@dataclass(frozen=True)
class FixationPoint:
    """One gaze point of one subject on one frame, in canonical pixel space."""

    x: float
    y: float
    subject_id: int = 0


@dataclass(frozen=True)
class FaceTrack:
    """Per-frame boxes, talking flags and landmarks for one face identity.

    Entries are aligned with the clip's frames; ``None`` marks frames
    where the face is absent.
    """

    face_id: int
    boxes: tuple[Optional[Box], ...]
    talking: tuple[bool, ...]
    landmarks: tuple[Optional[Landmarks], ...] = ()

    def present(self, t: int) -> bool:
        return self.boxes[t] is not None

    def first_present(self) -> Optional[int]:
        for t, b in enumerate(self.boxes):
            if b is not None:
                return t
        return None


@dataclass(frozen=True)
class SaliencyMap:
    """Nonnegative H x W grid; in ``distribution`` form it sums to 1."""

    values: np.ndarray
    form: str = "raw"

    def __post_init__(self):
        arr = _frozen_array(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"saliency map must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("saliency map contains non-finite values")
        if np.any(arr < 0):
            raise ValidationError("saliency map contains negative values")
        if self.form not in ("raw", "distribution"):
            raise ValidationError(f"unknown map form {self.form!r}")
        if self.form == "distribution":
            total = float(arr.sum())
            if abs(total - 1.0) > DISTRIBUTION_TOL:
                raise ValidationError(f"distribution map sums to {total}, expected 1")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class FeatureMapSeq:
    """Sequence of T feature grids (C x h x w) at a fixed stride."""

    maps: np.ndarray
    stride: int

    def __post_init__(self):
        arr = _frozen_array(self.maps)
        if arr.ndim != 4:
            raise ValidationError(f"feature sequence must be (T, C, h, w), got shape {arr.shape}")
        if self.stride < 1:
            raise ValidationError(f"stride must be >= 1, got {self.stride}")
        object.__setattr__(self, "maps", arr)

    def __len__(self) -> int:
        return self.maps.shape[0]


@dataclass(frozen=True)
class ClipSample:
    """One training/inference unit: frames, aligned audio windows, face
    tracks and ground-truth fixation data.

    frames          (T, 3, H, W) float32 in [0, 1]
    audio_windows   (T, H, W)    float32 spectrogram images in [0, 1]
    face_tracks     per-identity FaceTracks aligned with frames
    gt_fixations    per-frame tuples of FixationPoint
    gt_density      (T, H, W)    float32, each frame sums to 1
    """

    frames: np.ndarray
    audio_windows: np.ndarray
    face_tracks: tuple[FaceTrack, ...] = ()
    gt_fixations: tuple[tuple[FixationPoint, ...], ...] = ()
    gt_density: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", _frozen_array(self.frames, dtype=np.float32))
        object.__setattr__(self, "audio_windows", _frozen_array(self.audio_windows, dtype=np.float32))
        object.__setattr__(self, "face_tracks", tuple(self.face_tracks))
        object.__setattr__(self, "gt_fixations", tuple(tuple(f) for f in self.gt_fixations))
        if self.gt_density is not None:
            object.__setattr__(self, "gt_density", _frozen_array(self.gt_density, dtype=np.float32))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    @property
    def width(self) -> int:
        return self.frames.shape[3]


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_clip."""

    field: str
    frame: Optional[int]
    message: str

    def __str__(self) -> str:
        where = f" (frame {self.frame})" if self.frame is not None else ""
        return f"{self.field}{where}: {self.message}"


def normalize_map(m: SaliencyMap | np.ndarray) -> SaliencyMap:
    """Rescale a nonnegative map so it sums to 1.

    An all-zero map maps to the uniform distribution so that degenerate
    predictions stay usable by distribution-based losses and metrics.
    Raises ValidationError on negative values.
    """
    if not isinstance(m, SaliencyMap):
        m = SaliencyMap(np.asarray(m), form="raw")
    values = m.values
    total = float(values.sum())
    if total <= 0.0:
        out = np.full_like(values, 1.0 / values.size)
    else:
        out = values / total
    return SaliencyMap(out, form="distribution")


def validate_clip(sample: ClipSample) -> list[Violation]:
    """Check every ClipSample invariant; returns violations as data.

    An empty list means the clip is well formed. Each violation names the
    offending field and, where meaningful, the frame index.
    """
    out: list[Violation] = []
    t_frames = sample.frames.shape[0]
    h, w = sample.height, sample.width

    if sample.frames.ndim != 4 or sample.frames.shape[1] != 3:
        out.append(Violation("frames", None, f"expected (T, 3, H, W), got {sample.frames.shape}"))
        return out

    if sample.audio_windows.shape[0] != t_frames:
        out.append(Violation(
            "audio_windows", None,
            f"length {sample.audio_windows.shape[0]} != frame count {t_frames}"))
    if sample.gt_fixations and len(sample.gt_fixations) != t_frames:
        out.append(Violation(
            "gt_fixations", None,
            f"length {len(sample.gt_fixations)} != frame count {t_frames}"))
    if sample.gt_density is not None and sample.gt_density.shape[0] != t_frames:
        out.append(Violation(
            "gt_density", None,
            f"length {sample.gt_density.shape[0]} != frame count {t_frames}"))

    seen_ids: set[int] = set()
    for track in sample.face_tracks:
        name = f"face_tracks[face_id={track.face_id}]"
        if track.face_id in seen_ids:
            out.append(Violation(name, None, "duplicate face_id"))
        seen_ids.add(track.face_id)
        if len(track.boxes) != t_frames or len(track.talking) != t_frames:
            out.append(Violation(name, None, f"per-frame sequences must have length {t_frames}"))
            continue
        if track.landmarks and len(track.landmarks) != t_frames:
            out.append(Violation(name + ".landmarks", None,
                                 f"length {len(track.landmarks)} != frame count {t_frames}"))
        for t, box in enumerate(track.boxes):
            if box is None:
                continue
            if box.x < 0 or box.y < 0 or box.x + box.w > w or box.y + box.h > h:
                out.append(Violation(name + ".boxes", t,
                                     f"box ({box.x}, {box.y}, {box.w}, {box.h}) "
                                     f"extends past the {w}x{h} frame"))

    for t, fixations in enumerate(sample.gt_fixations):
        for fx in fixations:
            if not (0 <= fx.x < w and 0 <= fx.y < h):
                out.append(Violation("gt_fixations", t,
                                     f"fixation ({fx.x}, {fx.y}) outside {w}x{h} frame"))

    if sample.gt_density is not None:
        if np.any(sample.gt_density < 0):
            out.append(Violation("gt_density", None, "contains negative values"))
        sums = sample.gt_density.reshape(sample.gt_density.shape[0], -1).sum(axis=1)
        for t, s in enumerate(sums):
            if abs(float(s) - 1.0) > DENSITY_TOL:
                out.append(Violation("gt_density", t, f"sums to {float(s):.6g}, expected 1"))

    return out
