import sys
from pathlib import Path

import numpy as np
import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"
if str(SCRIPTS) not in sys.path:
    sys.path.insert(0, str(SCRIPTS))

from biastune.config import ModelConfig  # noqa: E402


@pytest.fixture
def tiny_cfg():
    """Smallest convenient config for fast forward passes."""
    return ModelConfig(
        image_size=16, patch_size=4, embed_dim=8, depth=1, num_heads=2,
        mlp_ratio=2.0, text_dim=6, prompt_dim=8, decoder_depth=1,
        class_vocab=("a", "b"),
    )


@pytest.fixture
def micro_cfg():
    """Sub-1k-parameter config for finite-difference gradient checks."""
    return ModelConfig(
        image_size=8, patch_size=4, embed_dim=4, depth=1, num_heads=1,
        mlp_ratio=1.0, text_dim=3, prompt_dim=4, decoder_depth=1,
        class_vocab=("a", "b"),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
