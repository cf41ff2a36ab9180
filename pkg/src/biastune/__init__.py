"""Bias-tuning for text-prompted segmentation transformers.

Frozen ViT backbone, trainable zero-initialized shift biases on every affine
output, a text affine layer over frozen label embeddings, and a fully
trainable lightweight mask decoder, trained with blank-label expansion and
focal loss.
"""

from .config import (
    ConfigError,
    FocalLossConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
    load_run_config,
    toy_model_config,
    vit_base_like_config,
)
from .model import PromptableSegmenter

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FocalLossConfig",
    "ModelConfig",
    "PromptableSegmenter",
    "RunConfig",
    "TrainConfig",
    "load_run_config",
    "toy_model_config",
    "vit_base_like_config",
    "__version__",
]
