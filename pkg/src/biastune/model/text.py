"""Frozen text-embedding providers and the trainable Text Affine Layer."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F


class HashTextEmbedder:
    """Deterministic stand-in for a frozen general-domain text encoder.

    Each label hashes to its own fixed unit-norm pseudo-random vector, so the
    mapping is injective over any realistic vocabulary and identical across
    processes and platforms.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("embedding dim must be >= 1")
        self.dim = dim

    def embed(self, label: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v) + 1e-12
        return v.astype(np.float32)


class FileTextEmbedder:
    """Embeddings read from a TSV file: ``label<TAB>comma-separated floats``."""

    def __init__(self, path: str | Path, dim: int):
        self.dim = dim
        self.table: dict[str, np.ndarray] = {}
        path = Path(path)
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected label<TAB>floats")
            label, raw = line.split("\t", 1)
            vec = np.array([float(x) for x in raw.split(",")], dtype=np.float32)
            if vec.shape[0] != dim:
                raise ValueError(
                    f"{path}:{lineno}: embedding for {label!r} has dimension "
                    f"{vec.shape[0]}, expected {dim}"
                )
            self.table[label] = vec

    def embed(self, label: str) -> np.ndarray:
        if label not in self.table:
            raise KeyError(f"no embedding for label {label!r}")
        return self.table[label]


class TextAffineLayer(nn.Module):
    """Affine -> rectifier -> batch normalization over frozen text embeddings.

    Train mode normalizes with batch statistics and updates running ones;
    eval mode normalizes with the running statistics. A train-mode batch of
    one is a hard error: its statistics are undefined and would corrupt the
    running estimates.
    """

    def __init__(self, text_dim: int, prompt_dim: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.text_dim = text_dim
        self.prompt_dim = prompt_dim
        self.momentum = momentum
        self.eps = eps
        self.weight = nn.Parameter(torch.empty(text_dim, prompt_dim))
        self.bias = nn.Parameter(torch.zeros(prompt_dim))
        self.gamma = nn.Parameter(torch.ones(prompt_dim))
        self.beta = nn.Parameter(torch.zeros(prompt_dim))
        self.register_buffer("running_mean", torch.zeros(prompt_dim))
        self.register_buffer("running_var", torch.ones(prompt_dim))

    def reset_parameters(self):
        nn.init.normal_(self.weight, std=self.text_dim ** -0.5)
        with torch.no_grad():
            self.bias.zero_()
            self.gamma.fill_(1.0)
            self.beta.zero_()
            self.running_mean.zero_()
            self.running_var.fill_(1.0)

    def pre_norm(self, x: torch.Tensor) -> torch.Tensor:
        """Rectified affine output, before batch normalization."""
        return F.relu(x @ self.weight + self.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeeze = x.ndim == 1
        if squeeze:
            x = x.unsqueeze(0)
        if x.ndim != 2 or x.shape[1] != self.text_dim:
            raise ValueError(f"expected (B, {self.text_dim}) input, got {tuple(x.shape)}")
        if not torch.isfinite(x).all():
            raise ValueError("non-finite text embedding input")

        h = self.pre_norm(x)
        if self.training:
            n = h.shape[0]
            if n < 2:
                raise ValueError(
                    "train-mode batch normalization needs a batch of at least 2 prompts"
                )
            mean = h.mean(dim=0)
            var = h.var(dim=0, unbiased=False)
            with torch.no_grad():
                unbiased = var.detach() * n / (n - 1)
                self.running_mean.mul_(1 - self.momentum).add_(self.momentum * mean.detach())
                self.running_var.mul_(1 - self.momentum).add_(self.momentum * unbiased)
        else:
            mean = self.running_mean
            var = self.running_var
        y = self.gamma * (h - mean) / torch.sqrt(var + self.eps) + self.beta
        return y.squeeze(0) if squeeze else y
