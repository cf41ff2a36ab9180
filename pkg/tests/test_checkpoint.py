"""Delta checkpoint round-trips, fingerprint enforcement, and size bounds."""

import numpy as np
import pytest
import torch

from count_params import count_params

from biastune.checkpoint import (
    CheckpointError,
    checkpoint_model_config,
    frozen_fingerprint,
    load_delta_checkpoint,
    read_header,
    save_delta_checkpoint,
)
from biastune.config import FocalLossConfig, TrainConfig
from biastune.model import PromptableSegmenter
from biastune.tuning import build_optimizer, training_step


def _perturb(model, seed=0):
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        for _, p in model.named_parameters():
            if p.requires_grad:
                p.add_(torch.from_numpy(rng.normal(0, 0.05, p.shape).astype(np.float32)))
        model.tal.running_mean.fill_(0.25)
        model.tal.running_var.fill_(2.0)


def test_round_trip_is_bitwise(tiny_cfg, tmp_path):
    model = PromptableSegmenter(tiny_cfg, init_seed=3)
    _perturb(model)
    img = np.random.default_rng(0).uniform(0, 1, (16, 16, 3)).astype(np.float32)
    before = model.forward(img, "a")

    path = tmp_path / "ckpt.btck"
    save_delta_checkpoint(model, path, init_seed=3)

    fresh = PromptableSegmenter(tiny_cfg, init_seed=3)
    assert not np.array_equal(fresh.forward(img, "a"), before)
    load_delta_checkpoint(path, fresh)
    after = fresh.forward(img, "a")
    assert np.array_equal(before, after)
    for (n1, p1), (n2, p2) in zip(model.named_parameters(), fresh.named_parameters()):
        assert n1 == n2 and torch.equal(p1, p2), n1
    assert torch.equal(model.tal.running_mean, fresh.tal.running_mean)
    assert torch.equal(model.tal.running_var, fresh.tal.running_var)


def test_fingerprint_mismatch_refused(tiny_cfg, tmp_path):
    model = PromptableSegmenter(tiny_cfg, init_seed=3)
    path = tmp_path / "ckpt.btck"
    save_delta_checkpoint(model, path, init_seed=3)
    other = PromptableSegmenter(tiny_cfg, init_seed=4)  # different frozen draw
    with pytest.raises(CheckpointError, match="fingerprint"):
        load_delta_checkpoint(path, other)


def test_fingerprint_ignores_trainable_changes(tiny_cfg):
    model = PromptableSegmenter(tiny_cfg, init_seed=1)
    fp = frozen_fingerprint(model)
    _perturb(model)
    assert frozen_fingerprint(model) == fp
    with torch.no_grad():
        model.encoder.blocks[0].qkv.weight.add_(1.0)
    assert frozen_fingerprint(model) != fp


def test_checkpoint_has_no_frozen_arrays(tiny_cfg, tmp_path):
    model = PromptableSegmenter(tiny_cfg, init_seed=0)
    path = tmp_path / "ckpt.btck"
    save_delta_checkpoint(model, path, init_seed=0)
    header = read_header(path)
    frozen = {n for n, p in model.named_parameters() if not p.requires_grad}
    stored = {a["name"] for a in header["arrays"]}
    assert not stored & frozen
    assert "tal.running_mean" in stored and "tal.running_var" in stored


def test_same_state_same_bytes(tiny_cfg, tmp_path):
    a, b = tmp_path / "a.btck", tmp_path / "b.btck"
    model = PromptableSegmenter(tiny_cfg, init_seed=0)
    save_delta_checkpoint(model, a, init_seed=0)
    save_delta_checkpoint(model, b, init_seed=0)
    assert a.read_bytes() == b.read_bytes()


def test_config_round_trip(tiny_cfg, tmp_path):
    model = PromptableSegmenter(tiny_cfg, init_seed=9)
    path = tmp_path / "ckpt.btck"
    save_delta_checkpoint(model, path, init_seed=9)
    cfg, seed = checkpoint_model_config(path)
    assert cfg == tiny_cfg
    assert seed == 9


def test_survives_training_state(tiny_cfg, tmp_path):
    from biastune.data import SegmentationSample

    model = PromptableSegmenter(tiny_cfg, init_seed=0)
    opt = build_optimizer(model, TrainConfig(batch_size=2, learning_rate=1e-3))
    rng = np.random.default_rng(0)
    batch = []
    for k in range(2):
        image = rng.uniform(0, 1, (16, 16, 3)).astype(np.float32)
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[:8] = k
        batch.append(SegmentationSample(image=image, label=tiny_cfg.class_vocab[k], mask=mask))
    for _ in range(5):
        training_step(model, batch, opt, FocalLossConfig())

    path = tmp_path / "ckpt.btck"
    save_delta_checkpoint(model, path, init_seed=0)
    img = rng.uniform(0, 1, (16, 16, 3)).astype(np.float32)
    want = model.forward(img, "a")
    fresh = PromptableSegmenter(tiny_cfg, init_seed=0)
    load_delta_checkpoint(path, fresh)
    assert np.array_equal(fresh.forward(img, "a"), want)


def test_checkpoint_size_fraction_of_full_dump():
    """At the ViT-base-like scale the delta file stays under 5% of a full dump."""
    oracle = count_params(
        image_size=1024, patch_size=16, embed_dim=768, depth=12,
        mlp_ratio=4.0, text_dim=512, prompt_dim=128, decoder_depth=2,
    )
    total = sum(oracle.values())
    trainable = total - oracle["frozen-backbone"]
    # 4-byte floats plus generous header allowance vs a hypothetical full dump
    assert (trainable * 4 + 64 * 1024) < 0.05 * (total * 4)
