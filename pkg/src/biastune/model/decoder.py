"""Lightweight two-way-attention mask decoder with an upsampling head.

One learned mask token plus the prompt token attend back and forth with the
image tokens; the mask token then gates upsampled image features into a
single full-resolution logit map. Every parameter here is trainable.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import ModelConfig
from .layers import ChannelLayerNorm


class Attention(nn.Module):
    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        if dim % num_heads != 0:
            raise ValueError(f"dim {dim} not divisible by num_heads {num_heads}")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        B, N, _ = x.shape
        return x.reshape(B, N, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(self, q_in: torch.Tensor, k_in: torch.Tensor, v_in: torch.Tensor) -> torch.Tensor:
        q = self._split(self.q(q_in))
        k = self._split(self.k(k_in))
        v = self._split(self.v(v_in))
        attn = (q @ k.transpose(-2, -1)) * self.head_dim ** -0.5
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(q_in.shape[0], q_in.shape[1], -1)
        return self.out(out)


class TwoWayBlock(nn.Module):
    def __init__(self, dim: int, num_heads: int, mlp_hidden: int):
        super().__init__()
        self.self_attn = Attention(dim, num_heads)
        self.norm1 = nn.LayerNorm(dim)
        self.cross_tokens = Attention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, mlp_hidden), nn.GELU(), nn.Linear(mlp_hidden, dim))
        self.norm3 = nn.LayerNorm(dim)
        self.cross_image = Attention(dim, num_heads)
        self.norm4 = nn.LayerNorm(dim)

    def forward(self, tokens: torch.Tensor, image: torch.Tensor):
        tokens = self.norm1(tokens + self.self_attn(tokens, tokens, tokens))
        tokens = self.norm2(tokens + self.cross_tokens(tokens, image, image))
        tokens = self.norm3(tokens + self.mlp(tokens))
        image = self.norm4(image + self.cross_image(image, tokens, tokens))
        return tokens, image


class MaskDecoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.prompt_dim
        heads = cfg.decoder_heads
        self.img_proj = nn.Linear(cfg.embed_dim, d)
        self.mask_token = nn.Parameter(torch.empty(d))
        self.blocks = nn.ModuleList(
            TwoWayBlock(d, heads, cfg.decoder_mlp_hidden) for _ in range(cfg.decoder_depth)
        )
        self.final_attn = Attention(d, heads)
        self.norm_final = nn.LayerNorm(d)

        up1 = max(d // 4, 1)
        up2 = max(d // 8, 1)
        self.up1 = nn.ConvTranspose2d(d, up1, kernel_size=2, stride=2)
        self.up_norm = ChannelLayerNorm(up1)
        self.up2 = nn.ConvTranspose2d(up1, up2, kernel_size=2, stride=2)
        self.hyper = nn.Sequential(nn.Linear(d, d), nn.GELU(), nn.Linear(d, up2))

    def reset_parameters(self):
        nn.init.normal_(self.mask_token, std=0.02)

    def forward(self, image_tokens: torch.Tensor, prompt: torch.Tensor) -> torch.Tensor:
        # image_tokens: (B, N, embed_dim); prompt: (B, prompt_dim) -> (B, H, W) logits
        if image_tokens.ndim != 3 or image_tokens.shape[-1] != self.cfg.embed_dim:
            raise ValueError(f"bad image token shape {tuple(image_tokens.shape)}")
        if prompt.ndim != 2 or prompt.shape[-1] != self.cfg.prompt_dim:
            raise ValueError(f"bad prompt shape {tuple(prompt.shape)}")
        B, N, _ = image_tokens.shape
        g = self.cfg.grid_size
        if N != g * g:
            raise ValueError(f"expected {g * g} image tokens, got {N}")

        image = self.img_proj(image_tokens)
        tokens = torch.stack(
            [self.mask_token.unsqueeze(0).expand(B, -1), prompt], dim=1
        )  # (B, 2, d)
        for blk in self.blocks:
            tokens, image = blk(tokens, image)
        tokens = self.norm_final(tokens + self.final_attn(tokens, image, image))

        feats = image.transpose(1, 2).reshape(B, -1, g, g)
        feats = F.gelu(self.up_norm(self.up1(feats)))
        feats = F.gelu(self.up2(feats))  # (B, up2, 4g, 4g)
        gate = self.hyper(tokens[:, 0])  # mask-token readout, (B, up2)
        low = torch.einsum("bc,bchw->bhw", gate, feats)
        size = (self.cfg.image_size, self.cfg.image_size)
        return F.interpolate(
            low.unsqueeze(1), size=size, mode="bilinear", align_corners=False
        ).squeeze(1)
