"""Raw dataset layout and annotation parsing.

A source dataset is a directory tree::

    root/
      videos/<video_id>.mp4      required
      faces/<video_id>.json      required
      fixations/<video_id>.csv   required
      audio/<video_id>.wav       optional (silence assumed if missing)

``faces/*.json`` holds per-face tracks in original-resolution pixels::

    {"width": 640, "height": 360,
     "faces": [{"face_id": 0,
                "frames": {"17": {"box": [x, y, w, h],
                                  "talking": true,
                                  "landmarks": {"eyes": [[x, y], ...],
                                                "nose": [...],
                                                "mouth": [...]}}}}]}

``fixations/*.csv`` has a header row ``frame,subject,x,y`` with one gaze
point per row, also in original-resolution pixels. Both are rescaled to
the canonical square frame at ingest time.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from ..datamodel import Box, FixationPoint, Landmarks, ValidationError


@dataclass(frozen=True)
class VideoEntry:
    """Paths for one video's assets; audio_path may be None."""

    video_id: str
    video_path: Path
    faces_path: Path
    fixations_path: Path
    audio_path: Path | None


@dataclass(frozen=True)
class RawFaceTrack:
    """Sparse original-resolution track: frame index -> annotation."""

    face_id: int
    boxes: dict[int, Box]
    talking: dict[int, bool]
    landmarks: dict[int, Landmarks]


@dataclass(frozen=True)
class RawAnnotations:
    width: int
    height: int
    tracks: tuple[RawFaceTrack, ...]
    fixations: dict[int, tuple[FixationPoint, ...]]


class DatasetLayout:
    """Discovers and reads the raw directory layout."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def discover(self) -> list[VideoEntry]:
        """List videos that have all required assets, sorted by id.

        Raises ValidationError when a video is missing its face or
        fixation annotations, naming the absent file.
        """
        videos_dir = self.root / "videos"
        if not videos_dir.is_dir():
            raise ValidationError(f"dataset root {self.root} has no videos/ directory")
        entries = []
        for video_path in sorted(videos_dir.glob("*.mp4")):
            vid = video_path.stem
            faces_path = self.root / "faces" / f"{vid}.json"
            fix_path = self.root / "fixations" / f"{vid}.csv"
            for required in (faces_path, fix_path):
                if not required.is_file():
                    raise ValidationError(f"video {vid}: missing annotation file {required}")
            audio_path = self.root / "audio" / f"{vid}.wav"
            entries.append(VideoEntry(
                video_id=vid,
                video_path=video_path,
                faces_path=faces_path,
                fixations_path=fix_path,
                audio_path=audio_path if audio_path.is_file() else None,
            ))
        return entries

    def read_annotations(self, entry: VideoEntry) -> RawAnnotations:
        """Parse the face json and fixation csv for one video."""
        with open(entry.faces_path) as fh:
            doc = json.load(fh)
        try:
            width, height = int(doc["width"]), int(doc["height"])
            tracks = []
            for face in doc["faces"]:
                boxes: dict[int, Box] = {}
                talking: dict[int, bool] = {}
                landmarks: dict[int, Landmarks] = {}
                for key, rec in face["frames"].items():
                    t = int(key)
                    bx = rec["box"]
                    boxes[t] = Box(float(bx[0]), float(bx[1]), float(bx[2]), float(bx[3]))
                    talking[t] = bool(rec.get("talking", False))
                    lm = rec.get("landmarks")
                    if lm:
                        landmarks[t] = Landmarks(
                            eyes=tuple((float(x), float(y)) for x, y in lm.get("eyes", ())),
                            nose=tuple((float(x), float(y)) for x, y in lm.get("nose", ())),
                            mouth=tuple((float(x), float(y)) for x, y in lm.get("mouth", ())),
                        )
                tracks.append(RawFaceTrack(int(face["face_id"]), boxes, talking, landmarks))
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"{entry.faces_path}: malformed face annotations: {exc}") from exc

        fixations: dict[int, list[FixationPoint]] = {}
        with open(entry.fixations_path, newline="") as fh:
            reader = csv.DictReader(fh)
            required_cols = {"frame", "subject", "x", "y"}
            if reader.fieldnames is None or not required_cols.issubset(reader.fieldnames):
                raise ValidationError(
                    f"{entry.fixations_path}: expected columns {sorted(required_cols)}")
            for row in reader:
                t = int(row["frame"])
                fixations.setdefault(t, []).append(
                    FixationPoint(float(row["x"]), float(row["y"]), int(row["subject"])))

        return RawAnnotations(
            width=width,
            height=height,
            tracks=tuple(sorted(tracks, key=lambda tr: tr.face_id)),
            fixations={t: tuple(v) for t, v in fixations.items()},
        )
