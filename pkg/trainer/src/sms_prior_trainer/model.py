"""The noise-prediction network, mirroring the reconstruction core exactly.

Residual conv net on two-channel (real/imaginary) images with a sinusoidal
step embedding:

    temb = fc2(silu(fc1(sin_embed(t))))
    h = conv_in(x)
    per block: h = h + conv2(silu(conv1(h) + proj(temb)))
    eps = conv_out(silu(h))

Any change here must be reflected in the consumer's forward pass; the
exported manifests carry the architecture id ``rescnn-t64``.
"""

from __future__ import annotations

import math

import torch
from torch import nn

ARCHITECTURE = "rescnn-t64"


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """[sin(t f_i), cos(t f_i)] with f_i = 10000^(-i/half); t is (N,)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64, device=t.device) / half
    )
    args = t.double()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1).float()


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, emb_dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.proj = nn.Linear(emb_dim, channels)

    def forward(self, x, temb):
        y = self.conv1(x) + self.proj(temb)[:, :, None, None]
        y = self.conv2(torch.nn.functional.silu(y))
        return x + y


class NoisePredictor(nn.Module):
    def __init__(self, channels: int = 32, blocks: int = 4, emb_dim: int = 64):
        super().__init__()
        self.channels = channels
        self.emb_dim = emb_dim
        self.time_fc1 = nn.Linear(emb_dim, emb_dim)
        self.time_fc2 = nn.Linear(emb_dim, emb_dim)
        self.conv_in = nn.Conv2d(2, channels, 3, padding=1)
        self.blocks = nn.ModuleList(ResidualBlock(channels, emb_dim) for _ in range(blocks))
        self.conv_out = nn.Conv2d(channels, 2, 3, padding=1)

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        emb = sinusoidal_embedding(t, self.emb_dim)
        temb = self.time_fc2(torch.nn.functional.silu(self.time_fc1(emb)))
        h = self.conv_in(x)
        for block in self.blocks:
            h = block(h, temb)
        return self.conv_out(torch.nn.functional.silu(h))

    def layer_table(self) -> list[tuple[str, str, nn.Module]]:
        """(name, kind, module) in export order; names are the wire names."""
        table = [
            ("time.fc1", "time_embed", self.time_fc1),
            ("time.fc2", "time_embed", self.time_fc2),
            ("conv_in", "conv2d", self.conv_in),
        ]
        for i, block in enumerate(self.blocks):
            table.append((f"block{i}.conv1", "conv2d", block.conv1))
            table.append((f"block{i}.proj", "dense", block.proj))
            table.append((f"block{i}.conv2", "conv2d", block.conv2))
        table.append(("conv_out", "conv2d", self.conv_out))
        return table
