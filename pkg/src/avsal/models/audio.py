"""Audio branch: a 3-D CNN over short stacks of spectrogram images.

For every video frame the branch sees the 16 most recent per-frame
spectrogram images (indices clamped at the clip start) as a single-channel
16-deep volume. Four 3-D conv layers collapse the temporal depth 16 -> 1
while striding the spatial grid down to 1/8, yielding one spatial feature
map per frame, aligned with the visual branch.
"""
from __future__ import annotations

import torch
import torch.nn as nn

STACK_DEPTH = 16


def stack_spectrograms(windows: torch.Tensor, depth: int = STACK_DEPTH) -> torch.Tensor:
    """(B, T, H, W) per-frame spectrogram images -> (B, T, depth, H, W).

    The stack for frame t holds images t - depth + 1 .. t; indices before
    the clip start are clamped to 0, so early frames repeat the first
    image.
    """
    t = windows.shape[1]
    idx = torch.arange(t, device=windows.device).unsqueeze(1) + \
        torch.arange(-depth + 1, 1, device=windows.device).unsqueeze(0)
    idx = idx.clamp(min=0)
    return windows[:, idx]


class AudioBranch(nn.Module):
    """(B, T, H, W) spectrogram images -> (B, T, out, H/8, W/8).

    Temporal strides are 2 at every layer (16 -> 8 -> 4 -> 2 -> 1);
    spatial strides are 2/2/2/1.
    """

    def __init__(self, channels: tuple[int, ...] = (16, 32, 64, 64),
                 depth: int = STACK_DEPTH):
        super().__init__()
        c1, c2, c3, c4 = channels
        self.depth = depth
        self.features = nn.Sequential(
            nn.Conv3d(1, c1, 3, stride=(2, 2, 2), padding=1), nn.ReLU(inplace=True),
            nn.Conv3d(c1, c2, 3, stride=(2, 2, 2), padding=1), nn.ReLU(inplace=True),
            nn.Conv3d(c2, c3, 3, stride=(2, 2, 2), padding=1), nn.ReLU(inplace=True),
            nn.Conv3d(c3, c4, 3, stride=(2, 1, 1), padding=1), nn.ReLU(inplace=True),
        )
        self.out_channels = c4

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        b, t, h, w = windows.shape
        stacks = stack_spectrograms(windows, self.depth)
        vol = stacks.reshape(b * t, 1, self.depth, h, w)
        feat = self.features(vol)
        if feat.shape[2] != 1:
            raise ValueError(
                f"temporal depth {self.depth} did not collapse to 1 (got {feat.shape[2]})")
        feat = feat.squeeze(2)
        return feat.reshape(b, t, *feat.shape[1:])
