"""Frozen affine layers carrying trainable zero-initialized output shifts."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class ShiftedLinear(nn.Module):
    """Frozen weight/bias affine plus a trainable shift added to its output.

    The shift starts at zero, so the layer is exactly the frozen affine until
    tuning moves it.
    """

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(out_features, in_features), requires_grad=False)
        self.bias = nn.Parameter(torch.empty(out_features), requires_grad=False)
        self.shift = nn.Parameter(torch.zeros(out_features))

    def reset_parameters(self):
        # frozen bias drawn nonzero so the base affine is generic, not degenerate
        nn.init.normal_(self.weight, std=0.02)
        nn.init.normal_(self.bias, std=0.02)
        with torch.no_grad():
            self.shift.zero_()

    def forward(self, x: torch.Tensor, use_shift: bool = True) -> torch.Tensor:
        out = F.linear(x, self.weight, self.bias)
        if use_shift:
            out = out + self.shift
        return out


class ShiftedPatchEmbed(nn.Module):
    """Frozen patchifying convolution with a trainable per-channel shift."""

    def __init__(self, patch_size: int, embed_dim: int, in_channels: int = 3):
        super().__init__()
        self.patch_size = patch_size
        self.weight = nn.Parameter(
            torch.empty(embed_dim, in_channels, patch_size, patch_size), requires_grad=False
        )
        self.bias = nn.Parameter(torch.empty(embed_dim), requires_grad=False)
        self.shift = nn.Parameter(torch.zeros(embed_dim))

    def reset_parameters(self):
        nn.init.normal_(self.weight, std=0.02)
        nn.init.normal_(self.bias, std=0.02)
        with torch.no_grad():
            self.shift.zero_()

    def forward(self, x: torch.Tensor, use_shift: bool = True) -> torch.Tensor:
        # x: (B, 3, H, W) -> (B, N, E) token grid in row-major order
        out = F.conv2d(x, self.weight, self.bias, stride=self.patch_size)
        if use_shift:
            out = out + self.shift.view(1, -1, 1, 1)
        return out.flatten(2).transpose(1, 2)


class ChannelLayerNorm(nn.Module):
    """LayerNorm over the channel axis of (B, C, H, W) maps."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=1, keepdim=True)
        var = x.var(dim=1, keepdim=True, unbiased=False)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.weight.view(1, -1, 1, 1) + self.bias.view(1, -1, 1, 1)
