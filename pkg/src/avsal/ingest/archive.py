"""Processed clip archive: the unit of storage between ingest and the
trainer/evaluator.

Layout::

    archive_root/
      manifest.json
      clips/<video_id>/<clip_index>/
        frames.avt     uint8   (T, H, W, 3) RGB
        audio.avt      float32 (T, H, W) spectrogram images in [0, 1]
        density.avt    float32 (T, H, W) per-frame gaze densities
        fixations.csv  frame,subject,x,y in canonical pixels, frame local
        faces.json     canonical-space tracks + per-frame attention weights
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..datamodel import Box, ClipSample, FaceTrack, FixationPoint, Landmarks, ValidationError
from ..tensorio import load_tensor, save_tensor
from . import audio as audio_mod
from .fixations import fixation_density, gt_face_weights
from .layout import DatasetLayout, RawAnnotations
from .video import CLIP_LENGTH, FRAME_SIZE, decode_video, extract_clips, frames_to_float

ARCHIVE_FORMAT = "avsal-archive-v1"


@dataclass(frozen=True)
class ArchiveClip:
    """One stored clip plus its location in the source video."""

    video_id: str
    clip_index: int
    frame_offset: int
    fps: float
    sample: ClipSample
    face_weights: np.ndarray  # (T, N) float64; rows are zero when unsupervised
    supervised: np.ndarray    # (T,) bool


class ClipArchive:
    """Read access to an archive directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.is_file():
            raise ValidationError(f"{self.root} is not a clip archive (no manifest.json)")
        with open(manifest_path) as fh:
            self.manifest = json.load(fh)
        if self.manifest.get("format") != ARCHIVE_FORMAT:
            raise ValidationError(
                f"unsupported archive format {self.manifest.get('format')!r} in {manifest_path}")

    def video_ids(self) -> list[str]:
        return [v["video_id"] for v in self.manifest["videos"]]

    def list_clips(self) -> list[tuple[str, int]]:
        out = []
        for video in self.manifest["videos"]:
            out.extend((video["video_id"], i) for i in range(video["num_clips"]))
        return out

    def clip_dir(self, video_id: str, clip_index: int) -> Path:
        return self.root / "clips" / video_id / f"{clip_index:03d}"

    def load(self, video_id: str, clip_index: int) -> ArchiveClip:
        return load_clip(self.clip_dir(video_id, clip_index))

    def load_all(self) -> list[ArchiveClip]:
        return [self.load(vid, i) for vid, i in self.list_clips()]


def _tracks_to_json(tracks: tuple[FaceTrack, ...]) -> list[dict]:
    out = []
    for track in tracks:
        frames = {}
        for t, box in enumerate(track.boxes):
            if box is None:
                continue
            rec: dict = {
                "box": [box.x, box.y, box.w, box.h],
                "talking": bool(track.talking[t]),
            }
            if track.landmarks and track.landmarks[t] is not None:
                lm = track.landmarks[t]
                rec["landmarks"] = {
                    "eyes": [list(p) for p in lm.eyes],
                    "nose": [list(p) for p in lm.nose],
                    "mouth": [list(p) for p in lm.mouth],
                }
            frames[str(t)] = rec
        out.append({"face_id": track.face_id, "frames": frames})
    return out


def _tracks_from_json(doc: list[dict], n_frames: int) -> tuple[FaceTrack, ...]:
    tracks = []
    for face in doc:
        boxes: list[Optional[Box]] = [None] * n_frames
        talking = [False] * n_frames
        landmarks: list[Optional[Landmarks]] = [None] * n_frames
        for key, rec in face["frames"].items():
            t = int(key)
            bx = rec["box"]
            boxes[t] = Box(*[float(v) for v in bx])
            talking[t] = bool(rec["talking"])
            lm = rec.get("landmarks")
            if lm:
                landmarks[t] = Landmarks(
                    eyes=tuple((float(x), float(y)) for x, y in lm["eyes"]),
                    nose=tuple((float(x), float(y)) for x, y in lm["nose"]),
                    mouth=tuple((float(x), float(y)) for x, y in lm["mouth"]),
                )
        tracks.append(FaceTrack(
            face_id=int(face["face_id"]),
            boxes=tuple(boxes),
            talking=tuple(talking),
            landmarks=tuple(landmarks),
        ))
    return tuple(tracks)


def save_clip(clip_dir: str | Path, clip: ArchiveClip) -> None:
    clip_dir = Path(clip_dir)
    clip_dir.mkdir(parents=True, exist_ok=True)
    sample = clip.sample

    frames_u8 = np.clip(np.round(sample.frames.transpose(0, 2, 3, 1) * 255.0), 0, 255).astype(np.uint8)
    save_tensor(clip_dir / "frames.avt", frames_u8)
    save_tensor(clip_dir / "audio.avt", sample.audio_windows)
    save_tensor(clip_dir / "density.avt", sample.gt_density)

    with open(clip_dir / "fixations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "subject", "x", "y"])
        for t, fixations in enumerate(sample.gt_fixations):
            for fx in fixations:
                writer.writerow([t, fx.subject_id, f"{fx.x:.4f}", f"{fx.y:.4f}"])

    doc = {
        "video_id": clip.video_id,
        "clip_index": clip.clip_index,
        "frame_offset": clip.frame_offset,
        "fps": clip.fps,
        "tracks": _tracks_to_json(sample.face_tracks),
        "weights": [
            list(map(float, clip.face_weights[t])) if clip.supervised[t] else None
            for t in range(sample.num_frames)
        ],
    }
    with open(clip_dir / "faces.json", "w") as fh:
        json.dump(doc, fh, indent=1)


def load_clip(clip_dir: str | Path) -> ArchiveClip:
    clip_dir = Path(clip_dir)
    faces_path = clip_dir / "faces.json"
    if not faces_path.is_file():
        raise ValidationError(f"{clip_dir} is not a clip directory (no faces.json)")
    with open(faces_path) as fh:
        doc = json.load(fh)

    frames_u8 = load_tensor(clip_dir / "frames.avt")
    t_frames = frames_u8.shape[0]
    audio_windows = load_tensor(clip_dir / "audio.avt")
    density = load_tensor(clip_dir / "density.avt")
    tracks = _tracks_from_json(doc["tracks"], t_frames)

    fixations: list[list[FixationPoint]] = [[] for _ in range(t_frames)]
    with open(clip_dir / "fixations.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            fixations[int(row["frame"])].append(
                FixationPoint(float(row["x"]), float(row["y"]), int(row["subject"])))

    sample = ClipSample(
        frames=frames_to_float(frames_u8),
        audio_windows=audio_windows,
        face_tracks=tracks,
        gt_fixations=tuple(tuple(f) for f in fixations),
        gt_density=density,
    )

    n = len(tracks)
    weights = np.zeros((t_frames, n), dtype=np.float64)
    supervised = np.zeros(t_frames, dtype=bool)
    for t, row in enumerate(doc["weights"]):
        if row is not None:
            weights[t] = row
            supervised[t] = True

    return ArchiveClip(
        video_id=doc["video_id"],
        clip_index=int(doc["clip_index"]),
        frame_offset=int(doc["frame_offset"]),
        fps=float(doc["fps"]),
        sample=sample,
        face_weights=weights,
        supervised=supervised,
    )


def build_video_clips(
    video_id: str,
    ann: RawAnnotations,
    frames_u8: np.ndarray,
    fps: float,
    logmel: np.ndarray,
    size: int = FRAME_SIZE,
    clip_length: int = CLIP_LENGTH,
) -> list[ArchiveClip]:
    """Turn one decoded video plus annotations into ArchiveClips.

    Annotations are rescaled from (ann.width, ann.height) to the
    canonical square; fixations that land outside it are dropped.
    """
    sx, sy = size / ann.width, size / ann.height
    n_total = frames_u8.shape[0]
    clips = []
    for clip_index, rng in enumerate(extract_clips(n_total, clip_length)):
        local = list(rng)
        frames = frames_to_float(frames_u8[local])
        frame_times = np.array([t / fps for t in local])
        audio_windows = audio_mod.clip_audio_windows(logmel, frame_times, size)

        tracks = []
        for raw in ann.tracks:
            boxes: list[Optional[Box]] = []
            talking: list[bool] = []
            lms: list[Optional[Landmarks]] = []
            for t in local:
                box = raw.boxes.get(t)
                boxes.append(box.scaled(sx, sy) if box is not None else None)
                talking.append(raw.talking.get(t, False))
                lm = raw.landmarks.get(t)
                lms.append(lm.scaled(sx, sy) if lm is not None else None)
            tracks.append(FaceTrack(raw.face_id, tuple(boxes), tuple(talking), tuple(lms)))

        gt_fix = []
        for t in local:
            pts = []
            for fx in ann.fixations.get(t, ()):
                x, y = fx.x * sx, fx.y * sy
                if 0 <= x < size and 0 <= y < size:
                    pts.append(FixationPoint(x, y, fx.subject_id))
            gt_fix.append(tuple(pts))

        density = np.stack([
            fixation_density(pts, (size, size)) for pts in gt_fix
        ]).astype(np.float32)

        n = len(tracks)
        weights = np.zeros((clip_length, n), dtype=np.float64)
        supervised = np.zeros(clip_length, dtype=bool)
        for tt in range(clip_length):
            w, ok = gt_face_weights(gt_fix[tt], [tr.boxes[tt] for tr in tracks])
            if ok:
                weights[tt] = w
                supervised[tt] = True

        clips.append(ArchiveClip(
            video_id=video_id,
            clip_index=clip_index,
            frame_offset=local[0],
            fps=fps,
            sample=ClipSample(
                frames=frames,
                audio_windows=audio_windows,
                face_tracks=tuple(tracks),
                gt_fixations=tuple(gt_fix),
                gt_density=density,
            ),
            face_weights=weights,
            supervised=supervised,
        ))
    return clips


def ingest_dataset(
    dataset_root: str | Path,
    archive_root: str | Path,
    size: int = FRAME_SIZE,
    clip_length: int = CLIP_LENGTH,
) -> dict:
    """Process a raw dataset directory into a clip archive.

    Returns the manifest that was written. Videos shorter than one clip
    contribute nothing but are still listed with num_clips = 0.
    """
    layout = DatasetLayout(dataset_root)
    archive_root = Path(archive_root)
    videos_meta = []

    for entry in layout.discover():
        frames_u8, fps = decode_video(entry.video_path, size)
        ann = layout.read_annotations(entry)

        if entry.audio_path is not None:
            samples, rate = audio_mod.load_wav(entry.audio_path)
            samples = audio_mod.resample_audio(samples, rate)
        else:
            samples = np.zeros(int(round(frames_u8.shape[0] / fps * audio_mod.SAMPLE_RATE)))
        logmel = audio_mod.logmel_spectrogram(samples)

        clips = build_video_clips(entry.video_id, ann, frames_u8, fps, logmel, size, clip_length)
        for clip in clips:
            save_clip(archive_root / "clips" / entry.video_id / f"{clip.clip_index:03d}", clip)
        videos_meta.append({
            "video_id": entry.video_id,
            "fps": fps,
            "num_frames": int(frames_u8.shape[0]),
            "num_clips": len(clips),
            "num_faces": len(ann.tracks),
            "has_audio": entry.audio_path is not None,
        })

    return write_manifest(archive_root, videos_meta, size, clip_length)


def write_manifest(
    archive_root: str | Path,
    videos_meta: list[dict],
    size: int = FRAME_SIZE,
    clip_length: int = CLIP_LENGTH,
) -> dict:
    archive_root = Path(archive_root)
    manifest = {
        "format": ARCHIVE_FORMAT,
        "frame_size": size,
        "clip_length": clip_length,
        "videos": videos_meta,
    }
    archive_root.mkdir(parents=True, exist_ok=True)
    with open(archive_root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest
