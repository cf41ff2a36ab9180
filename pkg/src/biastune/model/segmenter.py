"""Full promptable segmenter: encoder + text path + frozen prompt affine + decoder."""

from __future__ import annotations

import warnings

import numpy as np
import torch
import torch.nn as nn

from ..config import ModelConfig
from .decoder import MaskDecoder
from .encoder import ImageEmbedding, ImageEncoder
from .text import HashTextEmbedder, TextAffineLayer


class PromptableSegmenter(nn.Module):
    """Text-prompted mask predictor with a frozen backbone and shift-bias tuning.

    The image encoder weights, biases and the prompt affine are frozen; shift
    biases, layer norms, positional tables, the text affine layer and the
    whole decoder are the trainable set.
    """

    def __init__(self, cfg: ModelConfig, text_provider=None, init_seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.text_provider = text_provider or HashTextEmbedder(cfg.text_dim)
        if getattr(self.text_provider, "dim", cfg.text_dim) != cfg.text_dim:
            raise ValueError("text provider dimension does not match config text_dim")
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(init_seed)
            self.encoder = ImageEncoder(cfg)
            self.tal = TextAffineLayer(cfg.text_dim, cfg.prompt_dim)
            self.prompt_encoder = nn.Linear(cfg.prompt_dim, cfg.prompt_dim)
            self.decoder = MaskDecoder(cfg)
            self.encoder.reset_parameters()
            self.tal.reset_parameters()
            self.decoder.reset_parameters()
            nn.init.normal_(self.prompt_encoder.weight, std=0.02)
            nn.init.normal_(self.prompt_encoder.bias, std=0.02)
        self.prompt_encoder.weight.requires_grad_(False)
        self.prompt_encoder.bias.requires_grad_(False)
        self.eval()

    # ---- image path -------------------------------------------------------

    def _image_to_tensor(self, image: np.ndarray) -> torch.Tensor:
        image = np.asarray(image)
        s = self.cfg.image_size
        if image.shape != (s, s, 3):
            raise ValueError(f"expected image of shape ({s}, {s}, 3), got {image.shape}")
        if not np.isfinite(image).all():
            raise ValueError("non-finite image values")
        t = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))
        return t.permute(2, 0, 1).unsqueeze(0).to(self._dtype)

    @property
    def _dtype(self) -> torch.dtype:
        return self.tal.weight.dtype

    def encode_image(self, image: np.ndarray, use_shifts: bool = True) -> ImageEmbedding:
        with torch.no_grad():
            tokens = self.encoder(self._image_to_tensor(image), use_shifts)
        return ImageEmbedding(tokens=tokens, grid_size=self.cfg.grid_size)

    # ---- text path --------------------------------------------------------

    def embed_text(self, label: str) -> np.ndarray:
        return self.text_provider.embed(label)

    def encode_prompt(self, refined: torch.Tensor) -> torch.Tensor:
        """Frozen prompt affine applied to TAL output, (B, prompt_dim)."""
        return self.prompt_encoder(refined)

    def prompt_vector(self, label: str) -> torch.Tensor:
        """Eval-mode text -> TAL -> prompt encoding for a single label."""
        emb = torch.from_numpy(self.embed_text(label)).to(self._dtype).unsqueeze(0)
        refined = self.tal(emb)
        return self.encode_prompt(refined).squeeze(0)

    # ---- decoding ---------------------------------------------------------

    def decode_mask(self, image_emb: ImageEmbedding, prompt_emb) -> np.ndarray:
        prompt = torch.as_tensor(np.asarray(prompt_emb, dtype=np.float32)) \
            if not isinstance(prompt_emb, torch.Tensor) else prompt_emb
        if prompt.ndim != 1 or prompt.shape[0] != self.cfg.prompt_dim:
            raise ValueError(
                f"expected prompt vector of dimension {self.cfg.prompt_dim}, "
                f"got shape {tuple(prompt.shape)}"
            )
        with torch.no_grad():
            logits = self.decoder(image_emb.tokens, prompt.unsqueeze(0))
        return logits.squeeze(0).numpy()

    # ---- end-to-end -------------------------------------------------------

    def forward(self, image: np.ndarray, label: str) -> np.ndarray:
        """One (image, label) pair to a full-resolution logit map, eval mode."""
        if label not in self.cfg.class_vocab:
            warnings.warn(
                f"prompt {label!r} is not in class_vocab; embedding it anyway",
                stacklevel=2,
            )
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                emb = self.encode_image(image)
                prompt = self.prompt_vector(label)
                logits = self.decoder(emb.tokens, prompt.unsqueeze(0))
            return logits.squeeze(0).numpy()
        finally:
            self.train(was_training)

    def forward_train(self, images: torch.Tensor, labels: list[str]) -> torch.Tensor:
        """Differentiable batch forward; TAL uses batch statistics."""
        if images.shape[0] != len(labels):
            raise ValueError("batch size mismatch between images and labels")
        tokens = self.encoder(images.to(self._dtype))
        text = np.stack([self.embed_text(lab) for lab in labels])
        refined = self.tal(torch.from_numpy(text).to(self._dtype))
        prompt = self.encode_prompt(refined)
        return self.decoder(tokens, prompt)
