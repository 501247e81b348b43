"""Video decoding and clip segmentation."""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

FRAME_SIZE = 256
CLIP_LENGTH = 12


class IngestError(RuntimeError):
    """Raised when a source asset cannot be decoded."""


def decode_video(path: str | Path, size: int = FRAME_SIZE) -> tuple[np.ndarray, float]:
    """Decode a video into (frames, fps).

    frames is (F, size, size, 3) uint8 RGB; every frame is resized to the
    canonical square. Raises IngestError if the file is missing or yields
    no frames.
    """
    path = Path(path)
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise IngestError(f"cannot open video {path}")
    fps = cap.get(cv2.CAP_PROP_FPS)
    frames = []
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            frame = cv2.resize(frame, (size, size), interpolation=cv2.INTER_LINEAR)
            frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
    finally:
        cap.release()
    if not frames:
        raise IngestError(f"video {path} has no decodable frames")
    if not fps or fps <= 0 or not np.isfinite(fps):
        fps = 30.0
    return np.stack(frames), float(fps)


def extract_clips(n_frames: int, clip_length: int = CLIP_LENGTH) -> list[range]:
    """Split frame indices into consecutive non-overlapping clips.

    Trailing frames that do not fill a whole clip are dropped.
    """
    if clip_length < 1:
        raise ValueError(f"clip_length must be >= 1, got {clip_length}")
    return [range(s, s + clip_length) for s in range(0, n_frames - clip_length + 1, clip_length)]


def frames_to_float(frames: np.ndarray) -> np.ndarray:
    """uint8 (F, H, W, 3) RGB -> float32 (F, 3, H, W) in [0, 1]."""
    return (frames.astype(np.float32) / 255.0).transpose(0, 3, 1, 2)
