"""The full saliency network and its configuration.

ModelConfig fixes every width in the three branches and the fusion head.
The canonical profile matches the published architecture; the desk
profile (64x64 input, widths divided by 8) is a faithful miniature that
trains in minutes on a laptop CPU, used by the convergence tests and for
local experimentation. Both profiles share all code paths.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import cv2
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..ingest.archive import ArchiveClip
from ..ingest.faces import crop_faces
from .audio import AudioBranch
from .face import FaceBranch
from .fusion import FusionModule
from .visual import VisualBranch

FRAME_MEAN = (0.485, 0.456, 0.406)
CANONICAL_RESOLUTION = 256
GRID_STRIDE = 8


@dataclass(frozen=True)
class ModelConfig:
    """Architecture profile: input size, widths and enabled branches."""

    input_resolution: int = CANONICAL_RESOLUTION
    width_divisor: int = 1
    enable_audio: bool = True
    enable_face: bool = True

    def __post_init__(self):
        if self.input_resolution % GRID_STRIDE != 0:
            raise ValueError(f"input_resolution must be a multiple of {GRID_STRIDE}")
        if self.width_divisor < 1:
            raise ValueError("width_divisor must be >= 1")

    def _w(self, base: int) -> int:
        return max(1, base // self.width_divisor)

    @property
    def rgb_channels(self) -> tuple[int, ...]:
        return tuple(self._w(c) for c in (64, 128, 256, 512))

    @property
    def flow_channels(self) -> tuple[int, ...]:
        return tuple(self._w(c) for c in (64, 128, 256, 256))

    @property
    def visual_hidden(self) -> int:
        return self._w(256)

    @property
    def audio_channels(self) -> tuple[int, ...]:
        return tuple(self._w(c) for c in (16, 32, 64, 64))

    @property
    def face_channels(self) -> tuple[int, ...]:
        return tuple(self._w(c) for c in (64, 128, 256, 512, 512))

    @property
    def face_lstm_hidden(self) -> int:
        return self._w(256)

    @property
    def face_mlp_hidden(self) -> int:
        return self._w(128)

    @property
    def fusion_hidden(self) -> int:
        return self._w(128)

    @property
    def fusion_map_channels(self) -> int:
        return self._w(64)

    @property
    def crop_size(self) -> int:
        return self.input_resolution // 2

    def version_string(self) -> str:
        return f"saliency-net/1:w{self.width_divisor}"

    @classmethod
    def canonical(cls, **overrides) -> "ModelConfig":
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        return replace(cls(input_resolution=64, width_divisor=8), **overrides)


@dataclass
class ClipBatch:
    """Tensors for one training/inference step over B clips.

    All spatial data is at the model's input resolution; face crops come
    from the stored canonical frames so their detail does not depend on
    it. ``face_ids`` maps the N columns back to per-clip identities
    (None-padded where a clip has fewer faces).
    """

    frames: torch.Tensor       # (B, T, 3, R, R) mean-normalized
    audio: torch.Tensor        # (B, T, R, R)
    crops: torch.Tensor        # (B, N, T, 3, crop, crop)
    present: torch.Tensor      # (B, N, T) bool
    boxes: torch.Tensor        # (B, N, T, 4) input-resolution pixels
    gt_density: torch.Tensor   # (B, T, R, R) each frame sums to 1
    gt_weights: torch.Tensor   # (B, T, N)
    supervised: torch.Tensor   # (B, T) bool
    face_ids: list[list[Optional[int]]] = field(default_factory=list)

    @property
    def batch_size(self) -> int:
        return self.frames.shape[0]

    @property
    def num_faces(self) -> int:
        return self.crops.shape[1]


def _resize_stack(stack: np.ndarray, size: int) -> np.ndarray:
    """Resize (T, H, W) or (T, C, H, W) arrays with area interpolation."""
    if stack.shape[-1] == size:
        return stack
    out = []
    for item in stack:
        if item.ndim == 3:
            img = cv2.resize(item.transpose(1, 2, 0), (size, size),
                             interpolation=cv2.INTER_AREA)
            out.append(img.transpose(2, 0, 1))
        else:
            out.append(cv2.resize(item, (size, size), interpolation=cv2.INTER_AREA))
    return np.stack(out)


def _pool_density(density: np.ndarray, size: int) -> np.ndarray:
    """Mass-preserving downscale of (T, H, W) densities to (T, size, size)."""
    t, h, w = density.shape
    if h == size:
        return density
    k = h // size
    x = torch.from_numpy(density).unsqueeze(1)
    pooled = F.avg_pool2d(x, k) * (k * k)
    return pooled.squeeze(1).numpy()


def build_clip_batch(clips: list[ArchiveClip], config: ModelConfig) -> ClipBatch:
    """Assemble padded tensors for a list of archive clips."""
    res = config.input_resolution
    mean = np.array(FRAME_MEAN, dtype=np.float32).reshape(1, 3, 1, 1)
    n_max = max((len(c.sample.face_tracks) for c in clips), default=0)
    t_len = clips[0].sample.num_frames

    frames_l, audio_l, crops_l, present_l, boxes_l = [], [], [], [], []
    dens_l, w_l, sup_l, ids_l = [], [], [], []
    for clip in clips:
        sample = clip.sample
        canon = sample.height
        scale = res / canon
        frames_l.append(_resize_stack(sample.frames, res) - mean)
        audio_l.append(_resize_stack(sample.audio_windows, res))
        dens_l.append(_pool_density(sample.gt_density.astype(np.float64), res))

        crops, present = crop_faces(sample.frames, sample.face_tracks, config.crop_size)
        n = crops.shape[0]
        boxes = np.zeros((n_max, t_len, 4), dtype=np.float32)
        for i, track in enumerate(sample.face_tracks):
            for t, box in enumerate(track.boxes):
                if box is not None:
                    boxes[i, t] = (box.x * scale, box.y * scale,
                                   box.w * scale, box.h * scale)
        pad = n_max - n
        if pad:
            crops = np.concatenate(
                [crops, np.zeros((pad, *crops.shape[1:]), dtype=np.float32)])
            present = np.concatenate([present, np.zeros((pad, t_len), dtype=bool)])
        crops_l.append(crops)
        present_l.append(present)
        boxes_l.append(boxes)

        weights = np.zeros((t_len, n_max), dtype=np.float32)
        weights[:, :n] = clip.face_weights
        w_l.append(weights)
        sup_l.append(clip.supervised)
        ids_l.append([tr.face_id for tr in sample.face_tracks] + [None] * pad)

    return ClipBatch(
        frames=torch.from_numpy(np.stack(frames_l)),
        audio=torch.from_numpy(np.stack(audio_l)),
        crops=torch.from_numpy(np.stack(crops_l)),
        present=torch.from_numpy(np.stack(present_l)),
        boxes=torch.from_numpy(np.stack(boxes_l)),
        gt_density=torch.from_numpy(np.stack(dens_l)).float(),
        gt_weights=torch.from_numpy(np.stack(w_l)),
        supervised=torch.from_numpy(np.stack(sup_l)),
        face_ids=ids_l,
    )


@dataclass
class NetOutput:
    saliency: torch.Tensor      # (B, T, R, R) distributions
    face_weights: torch.Tensor  # (B, T, N)
    face_map: Optional[torch.Tensor]  # (B, T, R, R) or None


class SaliencyNet(nn.Module):
    """Visual + audio + face branches joined by the fusion module."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.visual = VisualBranch(
            rgb_channels=config.rgb_channels,
            flow_channels=config.flow_channels,
            hidden_channels=config.visual_hidden,
        )
        self.audio = AudioBranch(config.audio_channels)
        self.face = FaceBranch(
            channels=config.face_channels,
            lstm_hidden=config.face_lstm_hidden,
            mlp_hidden=config.face_mlp_hidden,
        )
        self.fusion = FusionModule(
            visual_channels=config.visual_hidden,
            audio_channels=config.audio_channels[-1],
            face_channels=1,
            hidden_channels=config.fusion_hidden,
            map_channels=config.fusion_map_channels,
            upsample=GRID_STRIDE,
        )

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0) -> "SaliencyNet":
        """Construct with deterministic He initialization."""
        torch.manual_seed(seed)
        net = cls(config)
        net.apply(init_parameters)
        return net

    def forward(self, batch: ClipBatch) -> NetOutput:
        b, t = batch.frames.shape[:2]
        res = batch.frames.shape[-1]
        fv = self.visual(batch.frames).reshape(b * t, -1, res // GRID_STRIDE,
                                               res // GRID_STRIDE)
        fa = None
        if self.config.enable_audio:
            fa = self.audio(batch.audio).flatten(0, 1)

        face_map = None
        weights = batch.frames.new_zeros(b, t, batch.num_faces)
        if self.config.enable_face and batch.num_faces > 0:
            weights, face_map = self.face(batch.crops, batch.present, batch.boxes,
                                          (res, res))

        flat_map = face_map.reshape(b * t, 1, res, res) if face_map is not None else None
        sal = self.fusion(fv, fa, flat_map).reshape(b, t, res, res)
        return NetOutput(saliency=sal, face_weights=weights, face_map=face_map)


def init_parameters(module: nn.Module) -> None:
    """He-normal weights and zero biases on conv/linear layers."""
    if isinstance(module, (nn.Conv2d, nn.Conv3d, nn.ConvTranspose2d, nn.Linear)):
        nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)
