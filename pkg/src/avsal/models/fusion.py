"""Fusion module: shared context, per-modality maps, saliency readout.

The three branch outputs meet on a common 1/8-resolution grid. A shared
hidden map h is the sum of per-modality 1x1 projections; each modality
then gets its own fused map from a 3x3 convolution over (h, own
features); the readout concatenates the three fused maps, collapses them
to one logit map, upsamples back to frame resolution and applies a
spatial softmax so the output is a distribution over pixels.

The 1x1 projections carry no bias, so a zero (or omitted) modality
contributes exactly nothing to h — disabling a branch is a configuration
choice, not a code change.
"""
from __future__ import annotations

from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F


class FusionModule(nn.Module):
    def __init__(self,
                 visual_channels: int = 256,
                 audio_channels: int = 64,
                 face_channels: int = 1,
                 hidden_channels: int = 128,
                 map_channels: int = 64,
                 upsample: int = 8):
        super().__init__()
        self.upsample = upsample
        self.theta1_visual = nn.Conv2d(visual_channels, hidden_channels, 1, bias=False)
        self.theta1_audio = nn.Conv2d(audio_channels, hidden_channels, 1, bias=False)
        self.theta1_face = nn.Conv2d(face_channels, hidden_channels, 1, bias=False)
        self.theta2_visual = nn.Conv2d(hidden_channels + visual_channels, map_channels, 3, padding=1)
        self.theta2_audio = nn.Conv2d(hidden_channels + audio_channels, map_channels, 3, padding=1)
        self.theta2_face = nn.Conv2d(hidden_channels + face_channels, map_channels, 3, padding=1)
        self.readout_conv = nn.Conv2d(3 * map_channels, 1, 1)
        self._channels = (visual_channels, audio_channels, face_channels)

    def _check(self, fv: torch.Tensor, fa: Optional[torch.Tensor],
               ff: Optional[torch.Tensor]) -> None:
        for name, feat, want in (("visual", fv, self._channels[0]),
                                 ("audio", fa, self._channels[1]),
                                 ("face", ff, self._channels[2])):
            if feat is None:
                continue
            if feat.shape[1] != want or feat.shape[2:] != fv.shape[2:]:
                raise ValueError(
                    f"{name} features have shape {tuple(feat.shape[1:])}, "
                    f"expected ({want}, {fv.shape[2]}, {fv.shape[3]})")

    def pool_face_map(self, face_map: torch.Tensor) -> torch.Tensor:
        """Average-pool a full-resolution (BT, 1, H, W) face map onto the
        fused grid."""
        if self.upsample == 1:
            return face_map
        return F.avg_pool2d(face_map, self.upsample)

    def shared_context(self, fv: torch.Tensor, fa: Optional[torch.Tensor],
                       ff: Optional[torch.Tensor]) -> torch.Tensor:
        """h = sum of bias-free 1x1 projections; None means a zero map."""
        self._check(fv, fa, ff)
        h = self.theta1_visual(fv)
        if fa is not None:
            h = h + self.theta1_audio(fa)
        if ff is not None:
            h = h + self.theta1_face(ff)
        return h

    def modality_maps(self, h: torch.Tensor, fv: torch.Tensor,
                      fa: Optional[torch.Tensor],
                      ff: Optional[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Per-modality fused maps from (h, own features)."""
        if fa is None:
            fa = fv.new_zeros(fv.shape[0], self._channels[1], *fv.shape[2:])
        if ff is None:
            ff = fv.new_zeros(fv.shape[0], self._channels[2], *fv.shape[2:])
        mv = self.theta2_visual(torch.cat([h, fv], dim=1))
        ma = self.theta2_audio(torch.cat([h, fa], dim=1))
        mf = self.theta2_face(torch.cat([h, ff], dim=1))
        return mv, ma, mf

    def readout(self, mv: torch.Tensor, ma: torch.Tensor,
                mf: torch.Tensor) -> torch.Tensor:
        """Fused maps -> per-frame spatial distribution (BT, H, W)."""
        logits = self.readout_conv(torch.cat([mv, ma, mf], dim=1))
        if self.upsample != 1:
            logits = F.interpolate(logits, scale_factor=self.upsample,
                                   mode="bilinear", align_corners=False)
        bt, _, h, w = logits.shape
        flat = logits.reshape(bt, h * w)
        return torch.softmax(flat, dim=1).reshape(bt, h, w)

    def forward(self, fv: torch.Tensor, fa: Optional[torch.Tensor],
                face_map: Optional[torch.Tensor]) -> torch.Tensor:
        """Full fusion pass.

        fv, fa are (BT, C, h, w) grid features (fa may be None);
        face_map is the full-resolution (BT, 1, H, W) composition or None.
        Returns (BT, H, W) saliency distributions.
        """
        ff = self.pool_face_map(face_map) if face_map is not None else None
        h = self.shared_context(fv, fa, ff)
        mv, ma, mf = self.modality_maps(h, fv, fa, ff)
        return self.readout(mv, ma, mf)
