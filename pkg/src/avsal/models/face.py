"""Face branch: parameter-shared per-face streams, cross-face attention
weights, and Gaussian face-map composition.

Every detected face gets its own stream — a small CNN over the face crop
followed by an LSTM over time — but all streams share one set of
parameters, so the branch handles any number of faces and is
permutation-equivariant by construction. A shared scorer looks at each
face's state next to the mean state of all present faces and produces a
softmax weight per face: the model's estimate of how much attention that
face draws. The branch output is a spatial map placing a peak-1 Gaussian
at each face (sized to its box) scaled by its weight.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from ..datamodel import Box
from .visual import conv_stack

CROP_SIZE = 128
_SIGMA_EPS = 1e-6


class FaceEncoder(nn.Module):
    """Crop -> fixed-length descriptor.

    The default is the 13 convolution layers of VGG-16 (pool after every
    block) followed by a global average pool, so a 128x128 crop becomes a
    512-vector.
    """

    def __init__(self, channels: tuple[int, ...] = (64, 128, 256, 512, 512),
                 convs: tuple[int, ...] = (2, 2, 3, 3, 3)):
        super().__init__()
        self.features = conv_stack(3, channels, convs, pools=len(channels))
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.out_features = channels[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.features(x)).flatten(1)


def gaussian_face_kernels(boxes: torch.Tensor, present: torch.Tensor,
                          height: int, width: int, scale: float = 1.0) -> torch.Tensor:
    """Peak-1 Gaussian kernel per face and frame.

    boxes is (B, N, T, 4) as (x, y, w, h) in canonical pixels; ``scale``
    converts pixels to grid units. Each kernel is centered on its box with
    sigma_x = w/2 and sigma_y = h/2; absent faces give a zero kernel.
    Computed without gradients — box geometry is data, not a parameter.
    Returns (B, N, T, height, width).
    """
    with torch.no_grad():
        mu_x = (boxes[..., 0] + boxes[..., 2] / 2) * scale
        mu_y = (boxes[..., 1] + boxes[..., 3] / 2) * scale
        sig_x = (boxes[..., 2] / 2 * scale).clamp_min(_SIGMA_EPS)
        sig_y = (boxes[..., 3] / 2 * scale).clamp_min(_SIGMA_EPS)
        xs = torch.arange(width, device=boxes.device, dtype=boxes.dtype)
        ys = torch.arange(height, device=boxes.device, dtype=boxes.dtype)
        gx = torch.exp(-0.5 * ((xs - mu_x.unsqueeze(-1)) / sig_x.unsqueeze(-1)) ** 2)
        gy = torch.exp(-0.5 * ((ys - mu_y.unsqueeze(-1)) / sig_y.unsqueeze(-1)) ** 2)
        kernels = gy.unsqueeze(-1) * gx.unsqueeze(-2)
        return kernels * present.to(boxes.dtype).unsqueeze(-1).unsqueeze(-1)


def compose_face_map(weights: Sequence[float], boxes: Sequence[Optional[Box]],
                     shape: tuple[int, int]) -> np.ndarray:
    """Weighted sum of per-face Gaussians as a (H, W) numpy map.

    Mirrors the tensor path for single frames; used by analysis code and
    as the reference in tests. Composition is linear in the weights.
    """
    h, w = shape
    out = np.zeros((h, w))
    xs, ys = np.arange(w), np.arange(h)
    for weight, box in zip(weights, boxes):
        if box is None or weight == 0.0:
            continue
        mx, my = box.center
        sx = max(box.w / 2, _SIGMA_EPS)
        sy = max(box.h / 2, _SIGMA_EPS)
        gx = np.exp(-0.5 * ((xs - mx) / sx) ** 2)
        gy = np.exp(-0.5 * ((ys - my) / sy) ** 2)
        out += weight * np.outer(gy, gx)
    return out


def masked_softmax(scores: torch.Tensor, present: torch.Tensor, dim: int) -> torch.Tensor:
    """Softmax over ``dim`` restricted to present entries.

    Absent entries get weight 0; a slice with nothing present comes out
    all zero rather than NaN. The stabilizing shift is the maximum over
    the *present* entries only, so a large score on an absent face can
    never underflow the denominator.
    """
    masked = scores.masked_fill(~present, float("-inf"))
    shift = masked.amax(dim=dim, keepdim=True).detach()
    shift = torch.where(torch.isfinite(shift), shift, torch.zeros_like(shift))
    expd = torch.exp(masked - shift)
    denom = expd.sum(dim=dim, keepdim=True)
    return expd / denom.clamp_min(1e-12)


class FaceBranch(nn.Module):
    """(B, N, T, 3, crop, crop) face crops -> attention weights + face map.

    forward returns (weights, face_map):

    weights   (B, T, N) — nonnegative, summing to 1 over present faces
              (all zero on frames with no face)
    face_map  (B, T, H, W) — weighted Gaussian composition at full frame
              resolution (the fusion module pools it to its grid)
    """

    def __init__(self,
                 channels: tuple[int, ...] = (64, 128, 256, 512),
                 convs: tuple[int, ...] = (2, 2, 2, 2),
                 lstm_hidden: int = 256,
                 mlp_hidden: int = 128):
        super().__init__()
        self.encoder = FaceEncoder(channels, convs)
        self.lstm = nn.LSTM(self.encoder.out_features, lstm_hidden,
                            num_layers=2, batch_first=True)
        self.scorer = nn.Sequential(
            nn.Linear(2 * lstm_hidden, mlp_hidden),
            nn.ReLU(inplace=True),
            nn.Linear(mlp_hidden, 1),
        )

    def face_states(self, crops: torch.Tensor, present: torch.Tensor) -> torch.Tensor:
        """Shared per-face temporal states (B, N, T, hidden).

        Absent frames feed a zero descriptor into the LSTM, so a face's
        state depends only on the frames where it actually appears.
        """
        b, n, t = crops.shape[:3]
        flat = crops.reshape(b * n * t, *crops.shape[3:])
        feat = self.encoder(flat).reshape(b * n, t, -1)
        feat = feat * present.reshape(b * n, t, 1).to(feat.dtype)
        states, _ = self.lstm(feat)
        return states.reshape(b, n, t, -1)

    def attention_weights(self, states: torch.Tensor, present: torch.Tensor) -> torch.Tensor:
        """Cross-face weights (B, N, T) from shared scoring.

        Each face is scored against the mean state of the faces present on
        that frame, then weights come from a presence-masked softmax.
        """
        mask = present.to(states.dtype)
        count = mask.sum(dim=1).clamp_min(1.0)
        context = (states * mask.unsqueeze(-1)).sum(dim=1) / count.unsqueeze(-1)
        context = context.unsqueeze(1).expand_as(states)
        scores = self.scorer(torch.cat([states, context], dim=-1)).squeeze(-1)
        return masked_softmax(scores, present, dim=1)

    def forward(self, crops: torch.Tensor, present: torch.Tensor, boxes: torch.Tensor,
                frame_shape: tuple[int, int]) -> tuple[torch.Tensor, torch.Tensor]:
        states = self.face_states(crops, present)
        weights = self.attention_weights(states, present)
        kernels = gaussian_face_kernels(boxes, present, frame_shape[0], frame_shape[1])
        face_map = (weights.unsqueeze(-1).unsqueeze(-1) * kernels).sum(dim=1)
        return weights.transpose(1, 2), face_map


def face_weight_mse(pred: torch.Tensor, gt: torch.Tensor,
                    supervised: torch.Tensor) -> tuple[torch.Tensor, int]:
    """Mean squared error between predicted and ground-truth face weights.

    pred and gt are (B, T, N); supervised is a (B, T) bool mask of frames
    that carry a ground-truth weight vector. The mean runs over all
    supervised (frame, face) entries. Returns (loss, n_supervised_frames);
    with no supervised frames the loss is a constant 0.
    """
    n_frames = int(supervised.sum().item())
    if n_frames == 0:
        return torch.zeros((), dtype=pred.dtype, device=pred.device), 0
    err = (pred - gt) ** 2 * supervised.unsqueeze(-1).to(pred.dtype)
    return err.sum() / (n_frames * pred.shape[-1]), n_frames
