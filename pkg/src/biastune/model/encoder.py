"""Patch-embedding ViT encoder whose affine outputs all carry trainable shifts."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import ModelConfig
from .layers import ShiftedLinear, ShiftedPatchEmbed


@dataclass
class ImageEmbedding:
    """Encoder output: one feature vector per patch, row-major grid order."""

    tokens: torch.Tensor  # (B, N, embed_dim)
    grid_size: int

    def __post_init__(self):
        if self.tokens.shape[1] != self.grid_size ** 2:
            raise ValueError("token count does not match grid size")


class EncoderBlock(nn.Module):
    """Pre-norm ViT block; qkv, attention out and both MLP affines are shifted."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        e = cfg.embed_dim
        self.num_heads = cfg.num_heads
        self.head_dim = e // cfg.num_heads
        self.ln1 = nn.LayerNorm(e)
        self.qkv = ShiftedLinear(e, 3 * e)
        self.proj = ShiftedLinear(e, e)
        self.ln2 = nn.LayerNorm(e)
        self.mlp1 = ShiftedLinear(e, cfg.mlp_hidden)
        self.mlp2 = ShiftedLinear(cfg.mlp_hidden, e)

    def forward(self, x: torch.Tensor, use_shifts: bool = True) -> torch.Tensor:
        B, N, E = x.shape
        h = self.ln1(x)
        qkv = self.qkv(h, use_shifts)
        qkv = qkv.reshape(B, N, 3, self.num_heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = (q @ k.transpose(-2, -1)) * self.head_dim ** -0.5
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, N, E)
        x = x + self.proj(out, use_shifts)

        h = self.ln2(x)
        h = F.gelu(self.mlp1(h, use_shifts))
        x = x + self.mlp2(h, use_shifts)
        return x


class ImageEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.patch = ShiftedPatchEmbed(cfg.patch_size, cfg.embed_dim)
        # factorized positional tables keep the trainable budget small at scale
        self.pos_rows = nn.Parameter(torch.empty(cfg.grid_size, cfg.embed_dim))
        self.pos_cols = nn.Parameter(torch.empty(cfg.grid_size, cfg.embed_dim))
        self.blocks = nn.ModuleList(EncoderBlock(cfg) for _ in range(cfg.depth))
        self.norm = nn.LayerNorm(cfg.embed_dim)

    def reset_parameters(self):
        self.patch.reset_parameters()
        nn.init.normal_(self.pos_rows, std=0.02)
        nn.init.normal_(self.pos_cols, std=0.02)
        for blk in self.blocks:
            for lin in (blk.qkv, blk.proj, blk.mlp1, blk.mlp2):
                lin.reset_parameters()

    def positional_grid(self) -> torch.Tensor:
        g = self.cfg.grid_size
        pos = self.pos_rows.unsqueeze(1) + self.pos_cols.unsqueeze(0)  # (g, g, E)
        return pos.reshape(g * g, -1)

    def forward(self, images: torch.Tensor, use_shifts: bool = True) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) images, got {tuple(images.shape)}")
        if images.shape[2] != self.cfg.image_size or images.shape[3] != self.cfg.image_size:
            raise ValueError(
                f"image spatial size {tuple(images.shape[2:])} does not match "
                f"config image_size {self.cfg.image_size}"
            )
        x = self.patch(images, use_shifts)
        x = x + self.positional_grid()
        for blk in self.blocks:
            x = blk(x, use_shifts)
        return self.norm(x)
