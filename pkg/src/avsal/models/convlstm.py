"""Convolutional LSTM cells and stacks."""
from __future__ import annotations

import torch
import torch.nn as nn


class ConvLSTMCell(nn.Module):
    """A single ConvLSTM cell.

    All four gates come from one convolution over the concatenated input
    and hidden state; peepholes are not used. Hidden and cell state keep
    the spatial size of the input (stride 1, same padding).
    """

    def __init__(self, in_channels: int, hidden_channels: int, kernel_size: int = 3):
        super().__init__()
        self.in_channels = in_channels
        self.hidden_channels = hidden_channels
        self.gates = nn.Conv2d(
            in_channels + hidden_channels,
            4 * hidden_channels,
            kernel_size,
            padding=kernel_size // 2,
        )

    def init_state(self, batch: int, height: int, width: int,
                   device=None, dtype=None) -> tuple[torch.Tensor, torch.Tensor]:
        shape = (batch, self.hidden_channels, height, width)
        kw = {"device": device, "dtype": dtype}
        return torch.zeros(shape, **kw), torch.zeros(shape, **kw)

    def forward(self, x: torch.Tensor,
                state: tuple[torch.Tensor, torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
        h, c = state
        gates = self.gates(torch.cat([x, h], dim=1))
        i, f, o, g = gates.chunk(4, dim=1)
        i, f, o = torch.sigmoid(i), torch.sigmoid(f), torch.sigmoid(o)
        g = torch.tanh(g)
        c_next = f * c + i * g
        h_next = o * torch.tanh(c_next)
        return h_next, c_next


class ConvLSTM(nn.Module):
    """Stack of ConvLSTM cells applied over a (B, T, C, H, W) sequence.

    State is created fresh per call, so memory never leaks across clips.
    Returns the top layer's hidden states as (B, T, hidden, H, W).
    """

    def __init__(self, in_channels: int, hidden_channels: int, num_layers: int = 2,
                 kernel_size: int = 3):
        super().__init__()
        cells = []
        for layer in range(num_layers):
            cells.append(ConvLSTMCell(
                in_channels if layer == 0 else hidden_channels,
                hidden_channels,
                kernel_size,
            ))
        self.cells = nn.ModuleList(cells)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _, h, w = x.shape
        states = [cell.init_state(b, h, w, device=x.device, dtype=x.dtype)
                  for cell in self.cells]
        outputs = []
        for step in range(t):
            inp = x[:, step]
            for layer, cell in enumerate(self.cells):
                h_next, c_next = cell(inp, states[layer])
                states[layer] = (h_next, c_next)
                inp = h_next
            outputs.append(inp)
        return torch.stack(outputs, dim=1)
