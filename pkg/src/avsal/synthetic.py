"""Scripted synthetic conversation scenes.

Generates small multi-face "conversation" videos with a known ground
truth: faces take turns talking (tone audio, open-mouth visual cue) and
the simulated audience shifts its gaze to the new talker a fixed number
of frames after each turn. Because the script is known exactly, tests and
demos can check pipeline behavior against closed-form expectations —
e.g. per-frame face-attention weights are exact dyadic fractions and the
gaze-transition lag is recoverable to the frame.

Data can be materialized either as a processed clip archive (bitwise
deterministic for a given seed) or as a raw dataset directory (mp4 + wav
+ annotation files) to exercise the full ingest path.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from .datamodel import Box, FixationPoint, Landmarks
from .ingest import audio as audio_mod
from .ingest.archive import ArchiveClip, build_video_clips, save_clip, write_manifest
from .ingest.layout import RawAnnotations, RawFaceTrack
from .ingest.video import CLIP_LENGTH, FRAME_SIZE

_FACE_COLORS = ((205, 170, 125), (125, 170, 205), (170, 205, 125), (205, 125, 170))


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the scripted scene generator."""

    n_videos: int = 1
    frames_per_video: int = 48
    n_faces: int = 2
    size: int = FRAME_SIZE
    fps: float = 25.0
    segment_length: int = 16   # frames per talking turn
    gaze_lag: int = 3          # frames between a turn onset and the gaze shift
    fixations_per_frame: int = 40
    attended_share: float = 0.75
    fixed_attended: Optional[int] = None  # pin gaze to one face for every frame
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_faces <= len(_FACE_COLORS):
            raise ValueError(f"n_faces must be in 1..{len(_FACE_COLORS)}")
        if self.gaze_lag >= self.segment_length:
            raise ValueError("gaze_lag must be shorter than a talking segment")
        if self.fixed_attended is not None and not 0 <= self.fixed_attended < self.n_faces:
            raise ValueError("fixed_attended must name one of the faces")


@dataclass(frozen=True)
class FaceGeom:
    face_id: int
    center: tuple[float, float]
    radius: float
    box: Box
    landmarks: Landmarks
    color: tuple[int, int, int]


def face_geometry(n_faces: int, size: int) -> list[FaceGeom]:
    """Fixed, non-overlapping face positions in a horizontal row."""
    geoms = []
    r = size * 0.10
    cy = size * 0.42
    for i in range(n_faces):
        cx = size * (i + 1) / (n_faces + 1)
        half = r * 1.3
        geoms.append(FaceGeom(
            face_id=i,
            center=(cx, cy),
            radius=r,
            box=Box(cx - half, cy - half, 2 * half, 2 * half),
            landmarks=Landmarks(
                eyes=((cx - 0.40 * r, cy - 0.33 * r), (cx + 0.40 * r, cy - 0.33 * r)),
                nose=((cx, cy + 0.10 * r),),
                mouth=((cx - 0.35 * r, cy + 0.50 * r), (cx + 0.35 * r, cy + 0.50 * r)),
            ),
            color=_FACE_COLORS[i],
        ))
    return geoms


def talker_schedule(n_frames: int, n_faces: int, segment_length: int) -> list[int]:
    """Round-robin talking turns: face i talks during segment i mod n."""
    return [(t // segment_length) % n_faces for t in range(n_frames)]


def attended_schedule(talkers: list[int], lag: int) -> list[int]:
    """Who the audience looks at: the talker as of ``lag`` frames ago."""
    return [talkers[max(0, t - lag)] for t in range(len(talkers))]


def render_frame(size: int, geoms: list[FaceGeom], talker: int) -> np.ndarray:
    """Draw one scene frame as (size, size, 3) uint8 RGB."""
    row = np.linspace(40, 80, size).astype(np.uint8)
    img = np.repeat(row[:, None], size, axis=1)
    img = np.stack([img] * 3, axis=-1).copy()
    for g in geoms:
        cx, cy = int(round(g.center[0])), int(round(g.center[1]))
        r = int(round(g.radius))
        cv2.circle(img, (cx, cy), r, g.color, -1)
        for ex, ey in g.landmarks.eyes:
            cv2.circle(img, (int(ex), int(ey)), max(1, r // 8), (30, 30, 30), -1)
        nx, ny = g.landmarks.nose[0]
        cv2.circle(img, (int(nx), int(ny)), max(1, r // 10), (90, 60, 50), -1)
        my = int(cy + 0.5 * g.radius)
        if g.face_id == talker:
            cv2.ellipse(img, (cx, my), (int(0.35 * r), int(0.22 * r)), 0, 0, 360,
                        (250, 250, 250), -1)
        else:
            cv2.line(img, (int(cx - 0.35 * r), my), (int(cx + 0.35 * r), my), (60, 40, 40), 1)
    return img


def _fixation_counts(n_faces: int, attended: int, total: int, share: float) -> list[int]:
    """Exact per-face fixation counts: the attended face gets
    round(share * total); the rest is split evenly, remainder to the
    lowest face ids."""
    counts = [0] * n_faces
    counts[attended] = int(round(share * total))
    rest = total - counts[attended]
    others = [i for i in range(n_faces) if i != attended]
    if others:
        base, extra = divmod(rest, len(others))
        for k, i in enumerate(others):
            counts[i] = base + (1 if k < extra else 0)
    else:
        counts[attended] = total
    return counts


def _sample_fixations(
    geoms: list[FaceGeom], attended: int, spec: SyntheticSpec, rng: np.random.Generator,
) -> tuple[FixationPoint, ...]:
    counts = _fixation_counts(len(geoms), attended, spec.fixations_per_frame,
                              spec.attended_share)
    pts = []
    subject = 0
    for g, count in zip(geoms, counts):
        cx, cy = g.center
        r = g.radius
        for _ in range(count):
            # Jitter clamped inside the circle's bounding square, which is
            # strictly inside the face box — keeps count-to-box assignment
            # exact.
            x = float(np.clip(cx + rng.normal(0, r / 2), cx - r, cx + r))
            y = float(np.clip(cy + rng.normal(0, r / 2), cy - r, cy + r))
            pts.append(FixationPoint(x, y, subject))
            subject += 1
    return tuple(pts)


def audio_waveform(talkers: list[int], fps: float,
                   sample_rate: int = audio_mod.SAMPLE_RATE) -> np.ndarray:
    """Per-face tones: face i talks at 220 * (i + 1) Hz, amplitude 0.3."""
    n_samples = int(round(len(talkers) / fps * sample_rate))
    wave = np.zeros(n_samples)
    t = 0
    while t < len(talkers):
        seg_end = t
        while seg_end < len(talkers) and talkers[seg_end] == talkers[t]:
            seg_end += 1
        n0 = int(round(t / fps * sample_rate))
        n1 = min(n_samples, int(round(seg_end / fps * sample_rate)))
        freq = 220.0 * (talkers[t] + 1)
        tau = np.arange(n0, n1) / sample_rate
        wave[n0:n1] = 0.3 * np.sin(2 * np.pi * freq * tau)
        t = seg_end
    return wave


def build_synthetic_video(
    spec: SyntheticSpec, video_index: int,
) -> tuple[np.ndarray, RawAnnotations, np.ndarray]:
    """Render one scripted video.

    Returns (frames_u8, annotations, audio_samples) with annotations in
    canonical pixel space (ann.width == ann.height == spec.size).
    """
    rng = np.random.default_rng(spec.seed * 1000 + video_index)
    geoms = face_geometry(spec.n_faces, spec.size)
    talkers = talker_schedule(spec.frames_per_video, spec.n_faces, spec.segment_length)
    if spec.fixed_attended is not None:
        attended = [spec.fixed_attended] * spec.frames_per_video
    else:
        attended = attended_schedule(talkers, spec.gaze_lag)

    frames = np.stack([render_frame(spec.size, geoms, tk) for tk in talkers])
    fixations = {
        t: _sample_fixations(geoms, attended[t], spec, rng)
        for t in range(spec.frames_per_video)
    }
    tracks = tuple(
        RawFaceTrack(
            face_id=g.face_id,
            boxes={t: g.box for t in range(spec.frames_per_video)},
            talking={t: talkers[t] == g.face_id for t in range(spec.frames_per_video)},
            landmarks={t: g.landmarks for t in range(spec.frames_per_video)},
        )
        for g in geoms
    )
    ann = RawAnnotations(width=spec.size, height=spec.size, tracks=tracks,
                         fixations=fixations)
    wave = audio_waveform(talkers, spec.fps)
    return frames, ann, wave


def make_synthetic_archive(archive_root: str | Path,
                           spec: SyntheticSpec) -> list[ArchiveClip]:
    """Write a processed clip archive of scripted scenes; returns the clips."""
    archive_root = Path(archive_root)
    videos_meta = []
    all_clips = []
    for v in range(spec.n_videos):
        video_id = f"synth{v:03d}"
        frames, ann, wave = build_synthetic_video(spec, v)
        logmel = audio_mod.logmel_spectrogram(wave)
        clips = build_video_clips(video_id, ann, frames, spec.fps, logmel,
                                  spec.size, CLIP_LENGTH)
        for clip in clips:
            save_clip(archive_root / "clips" / video_id / f"{clip.clip_index:03d}", clip)
        all_clips.extend(clips)
        videos_meta.append({
            "video_id": video_id,
            "fps": spec.fps,
            "num_frames": spec.frames_per_video,
            "num_clips": len(clips),
            "num_faces": spec.n_faces,
            "has_audio": True,
        })
    write_manifest(archive_root, videos_meta, spec.size, CLIP_LENGTH)
    return all_clips


def make_raw_dataset(dataset_root: str | Path, spec: SyntheticSpec,
                     original_size: tuple[int, int] = (320, 240)) -> None:
    """Write scripted scenes as a raw dataset directory (mp4/wav/json/csv).

    Frames are stored at ``original_size`` (width, height) and annotations
    in matching pixels, so ingest has to rescale — the same work a real
    dataset would need.
    """
    import scipy.io.wavfile

    dataset_root = Path(dataset_root)
    ow, oh = original_size
    sx, sy = ow / spec.size, oh / spec.size
    for sub in ("videos", "faces", "fixations", "audio"):
        (dataset_root / sub).mkdir(parents=True, exist_ok=True)

    for v in range(spec.n_videos):
        video_id = f"synth{v:03d}"
        frames, ann, wave = build_synthetic_video(spec, v)

        writer = cv2.VideoWriter(
            str(dataset_root / "videos" / f"{video_id}.mp4"),
            cv2.VideoWriter_fourcc(*"mp4v"), spec.fps, (ow, oh))
        for frame in frames:
            bgr = cv2.cvtColor(frame, cv2.COLOR_RGB2BGR)
            writer.write(cv2.resize(bgr, (ow, oh), interpolation=cv2.INTER_LINEAR))
        writer.release()

        pcm = np.clip(wave * 32767.0, -32768, 32767).astype(np.int16)
        scipy.io.wavfile.write(dataset_root / "audio" / f"{video_id}.wav",
                               audio_mod.SAMPLE_RATE, pcm)

        faces_doc = {"width": ow, "height": oh, "faces": []}
        for track in ann.tracks:
            frames_doc = {}
            for t, box in track.boxes.items():
                b = box.scaled(sx, sy)
                lm = track.landmarks[t].scaled(sx, sy)
                frames_doc[str(t)] = {
                    "box": [b.x, b.y, b.w, b.h],
                    "talking": track.talking[t],
                    "landmarks": {
                        "eyes": [list(p) for p in lm.eyes],
                        "nose": [list(p) for p in lm.nose],
                        "mouth": [list(p) for p in lm.mouth],
                    },
                }
            faces_doc["faces"].append({"face_id": track.face_id, "frames": frames_doc})
        with open(dataset_root / "faces" / f"{video_id}.json", "w") as fh:
            json.dump(faces_doc, fh)

        with open(dataset_root / "fixations" / f"{video_id}.csv", "w", newline="") as fh:
            writer_csv = csv.writer(fh)
            writer_csv.writerow(["frame", "subject", "x", "y"])
            for t in sorted(ann.fixations):
                for fx in ann.fixations[t]:
                    writer_csv.writerow([t, fx.subject_id,
                                         f"{fx.x * sx:.4f}", f"{fx.y * sy:.4f}"])
