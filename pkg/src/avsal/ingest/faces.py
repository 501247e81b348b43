"""Face crop extraction for the face branch."""
from __future__ import annotations

import cv2
import numpy as np

from ..datamodel import FaceTrack

CROP_SIZE = 128


def crop_faces(
    frames: np.ndarray,
    tracks: tuple[FaceTrack, ...],
    size: int = CROP_SIZE,
) -> tuple[np.ndarray, np.ndarray]:
    """Cut per-face crops out of a clip.

    frames is (T, 3, H, W) float32 in [0, 1]. Returns

    crops    (N, T, 3, size, size) float32
    present  (N, T) bool

    Crops follow the track order; frames where a face is absent get a
    zero crop and present=False. Boxes are clamped to the frame before
    cropping.
    """
    t_frames, _, h, w = frames.shape
    n = len(tracks)
    crops = np.zeros((n, t_frames, 3, size, size), dtype=np.float32)
    present = np.zeros((n, t_frames), dtype=bool)

    for i, track in enumerate(tracks):
        for t in range(t_frames):
            box = track.boxes[t]
            if box is None:
                continue
            x0 = max(0, int(round(box.x)))
            y0 = max(0, int(round(box.y)))
            x1 = min(w, int(round(box.x + box.w)))
            y1 = min(h, int(round(box.y + box.h)))
            if x1 <= x0 or y1 <= y0:
                continue
            patch = frames[t, :, y0:y1, x0:x1].transpose(1, 2, 0)
            patch = cv2.resize(patch, (size, size), interpolation=cv2.INTER_LINEAR)
            crops[i, t] = patch.transpose(2, 0, 1)
            present[i, t] = True
    return crops, present
