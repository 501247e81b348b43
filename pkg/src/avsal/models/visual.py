"""Visual branch: appearance + motion features with temporal recurrence.

Two convolutional sub-branches run per frame: an appearance stack over
the RGB frame and a motion stack over the stacked pair (previous frame,
current frame). Both are brought to 1/8 of the input resolution, then
concatenated and passed through a two-layer ConvLSTM so the branch output
carries temporal context.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from .convlstm import ConvLSTM


def conv_stack(in_channels: int, channels: tuple[int, ...], convs: tuple[int, ...],
               pools: int) -> nn.Sequential:
    """VGG-style stack: ``convs[i]`` 3x3 convs at width ``channels[i]`` per
    block, with a 2x2 max-pool after each of the first ``pools`` blocks."""
    layers: list[nn.Module] = []
    prev = in_channels
    for b, (width, n_convs) in enumerate(zip(channels, convs)):
        for _ in range(n_convs):
            layers.append(nn.Conv2d(prev, width, 3, padding=1))
            layers.append(nn.ReLU(inplace=True))
            prev = width
        if b < pools:
            layers.append(nn.MaxPool2d(2))
    return nn.Sequential(*layers)


class AppearanceNet(nn.Module):
    """Per-frame RGB feature extractor; output stride 8."""

    def __init__(self, channels: tuple[int, ...] = (64, 128, 256, 512),
                 convs: tuple[int, ...] = (2, 2, 3, 3)):
        super().__init__()
        self.features = conv_stack(3, channels, convs, pools=3)
        self.out_channels = channels[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x)


class MotionNet(nn.Module):
    """Per-frame motion feature extractor over stacked frame pairs.

    Takes the 6-channel concatenation of the previous and current frame.
    Four strided conv stages (the third stage uses two strided convs)
    reach stride 16; a transposed conv brings the result back to stride 8
    so it aligns with the appearance features.
    """

    def __init__(self, channels: tuple[int, ...] = (64, 128, 256, 256)):
        super().__init__()
        c1, c2, c3, c4 = channels
        self.features = nn.Sequential(
            nn.Conv2d(6, c1, 7, stride=2, padding=3), nn.ReLU(inplace=True),
            nn.Conv2d(c1, c2, 5, stride=2, padding=2), nn.ReLU(inplace=True),
            nn.Conv2d(c2, c3, 5, stride=2, padding=2), nn.ReLU(inplace=True),
            nn.Conv2d(c3, c4, 3, stride=2, padding=1), nn.ReLU(inplace=True),
        )
        self.upsample = nn.Sequential(
            nn.ConvTranspose2d(c4, c4, 4, stride=2, padding=1), nn.ReLU(inplace=True),
        )
        self.out_channels = c4

    def forward(self, pair: torch.Tensor) -> torch.Tensor:
        return self.upsample(self.features(pair))


class VisualBranch(nn.Module):
    """Full visual branch: (B, T, 3, H, W) -> (B, T, hidden, H/8, W/8).

    The first frame is paired with itself for the motion stack, standing
    in for a zero-motion prior. Recurrent state starts fresh every call.
    """

    def __init__(self,
                 rgb_channels: tuple[int, ...] = (64, 128, 256, 512),
                 rgb_convs: tuple[int, ...] = (2, 2, 3, 3),
                 flow_channels: tuple[int, ...] = (64, 128, 256, 256),
                 hidden_channels: int = 256):
        super().__init__()
        self.appearance = AppearanceNet(rgb_channels, rgb_convs)
        self.motion = MotionNet(flow_channels)
        self.recurrence = ConvLSTM(
            self.appearance.out_channels + self.motion.out_channels,
            hidden_channels, num_layers=2)
        self.out_channels = hidden_channels

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        b, t, c, h, w = frames.shape
        flat = frames.reshape(b * t, c, h, w)
        app = self.appearance(flat)
        app = app.reshape(b, t, *app.shape[1:])

        prev = torch.cat([frames[:, :1], frames[:, :-1]], dim=1)
        pairs = torch.cat([prev, frames], dim=2).reshape(b * t, 2 * c, h, w)
        mot = self.motion(pairs)
        mot = mot.reshape(b, t, *mot.shape[1:])

        return self.recurrence(torch.cat([app, mot], dim=2))
