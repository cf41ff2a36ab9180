"""Parameter partitioning, focal loss, and the bias-tuning training loop."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch.optim import AdamW

from .config import FocalLossConfig, TrainConfig
from .data import SegmentationSample, augment
from .model import PromptableSegmenter

log = logging.getLogger(__name__)

CATEGORIES = (
    "frozen-backbone",
    "shift-bias",
    "layer-norm",
    "positional-embedding",
    "tal",
    "decoder",
)


@dataclass(frozen=True)
class PartitionEntry:
    parameter_id: str
    count: int
    category: str
    trainable: bool


@dataclass(frozen=True)
class ParameterPartition:
    entries: tuple[PartitionEntry, ...]

    @property
    def total_count(self) -> int:
        return sum(e.count for e in self.entries)

    @property
    def trainable_count(self) -> int:
        return sum(e.count for e in self.entries if e.trainable)

    @property
    def trainable_ratio(self) -> float:
        return self.trainable_count / self.total_count

    def category_counts(self) -> dict[str, int]:
        out = {c: 0 for c in CATEGORIES}
        for e in self.entries:
            out[e.category] += e.count
        return out

    def to_json(self) -> str:
        summary = {
            cat: {"count": n, "trainable": cat != "frozen-backbone"}
            for cat, n in self.category_counts().items()
        }
        summary["trainable_ratio"] = self.trainable_ratio
        return json.dumps(summary, indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = [f"{'category':22s} {'params':>12s}  trainable"]
        for cat, n in self.category_counts().items():
            lines.append(f"{cat:22s} {n:>12,d}  {'yes' if cat != 'frozen-backbone' else 'no'}")
        lines.append(f"{'total':22s} {self.total_count:>12,d}")
        lines.append(f"trainable_ratio {self.trainable_ratio:.6f}")
        return "\n".join(lines)


def _categorize(name: str) -> str:
    if name.startswith("decoder."):
        return "decoder"
    if name.startswith("tal."):
        return "tal"
    if name.startswith("prompt_encoder."):
        return "frozen-backbone"
    if name.startswith("encoder."):
        sub = name[len("encoder."):]
        if sub in ("pos_rows", "pos_cols"):
            return "positional-embedding"
        if sub.endswith(".shift"):
            return "shift-bias"
        if ".ln1." in sub or ".ln2." in sub or sub.startswith("norm."):
            return "layer-norm"
        if sub.endswith(".weight") or sub.endswith(".bias"):
            return "frozen-backbone"
    raise ValueError(
        f"parameter {name!r} has no partition category; new layers must be "
        "assigned one explicitly"
    )


def partition_parameters(model: PromptableSegmenter) -> ParameterPartition:
    """Label every parameter with its category and enforce the trainable flags."""
    entries = []
    for name, param in model.named_parameters():
        category = _categorize(name)
        trainable = category != "frozen-backbone"
        param.requires_grad_(trainable)
        entries.append(
            PartitionEntry(
                parameter_id=name,
                count=param.numel(),
                category=category,
                trainable=trainable,
            )
        )
    return ParameterPartition(entries=tuple(entries))


def focal_loss_per_image(
    logits: torch.Tensor, targets: torch.Tensor, cfg: FocalLossConfig
) -> torch.Tensor:
    """Per-image pixel sums of the two-branch focal term, shape (B,)."""
    if logits.shape != targets.shape:
        raise ValueError(f"logits shape {tuple(logits.shape)} != targets {tuple(targets.shape)}")
    if logits.ndim != 3:
        raise ValueError("expected (B, H, W) logits")
    is_binary = ((targets == 0) | (targets == 1)).all()
    if not bool(is_binary):
        raise ValueError("targets must be binary {0, 1} masks")
    targets = targets.to(logits.dtype)
    p = torch.sigmoid(logits).clamp(cfg.eps, 1.0 - cfg.eps)
    pos = -cfg.alpha * (1.0 - p) ** cfg.gamma * torch.log(p)
    neg = -(1.0 - cfg.alpha) * p ** cfg.gamma * torch.log(1.0 - p)
    per_pixel = torch.where(targets == 1.0, pos, neg)
    return per_pixel.sum(dim=(1, 2))


def focal_loss(logits: torch.Tensor, targets: torch.Tensor, cfg: FocalLossConfig) -> torch.Tensor:
    """Focal loss: sum over pixels inside each image, mean over the batch."""
    return focal_loss_per_image(logits, targets, cfg).mean()


def build_optimizer(model: PromptableSegmenter, train_cfg: TrainConfig) -> AdamW:
    """AdamW over the trainable set; no weight decay on shifts/norms/pos/TAL.

    Decaying zero-initialized shifts toward zero would fight the tuning method,
    so only the decoder group gets the usual 0.01.
    """
    partition = partition_parameters(model)
    by_name = dict(model.named_parameters())
    no_decay = [
        by_name[e.parameter_id]
        for e in partition.entries
        if e.trainable and e.category != "decoder"
    ]
    decoder = [by_name[e.parameter_id] for e in partition.entries if e.category == "decoder"]
    return AdamW(
        [
            {"params": no_decay, "weight_decay": 0.0},
            {"params": decoder, "weight_decay": 0.01},
        ],
        lr=train_cfg.learning_rate,
    )


def _batch_tensors(batch: list[SegmentationSample]):
    images = torch.from_numpy(
        np.stack([np.ascontiguousarray(s.image, dtype=np.float32) for s in batch])
    ).permute(0, 3, 1, 2)
    masks = torch.from_numpy(np.stack([s.mask.astype(np.float32) for s in batch]))
    labels = [s.label for s in batch]
    return images, labels, masks


def training_step(
    model: PromptableSegmenter,
    batch: list[SegmentationSample],
    optimizer: AdamW,
    focal_cfg: FocalLossConfig,
) -> float:
    """One gradient step on a batch; only trainable parameters move."""
    if len(batch) < 2:
        raise ValueError("training batch must hold at least 2 samples")
    model.train()
    images, labels, masks = _batch_tensors(batch)
    logits = model.forward_train(images, labels)
    per_image = focal_loss_per_image(logits, masks, focal_cfg)
    bad = torch.nonzero(~torch.isfinite(per_image))
    if bad.numel():
        idx = int(bad[0])
        raise RuntimeError(f"non-finite loss for batch sample index {idx} ({labels[idx]!r})")
    loss = per_image.mean()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.item())


def fit(
    train_cfg: TrainConfig,
    dataset: list[SegmentationSample],
    model: PromptableSegmenter,
) -> tuple[PromptableSegmenter, list[float]]:
    """Bias-tune the model on an already blank-label-expanded sample list.

    Deterministic in train_cfg.seed: batch order and per-sample augmentation
    streams are derived from it.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    optimizer = build_optimizer(model, train_cfg)
    history: list[float] = []
    order_rng = np.random.default_rng([train_cfg.seed, 0x0d0e])

    model.train()
    order: list[int] = []
    for step in range(train_cfg.max_steps):
        while len(order) < train_cfg.batch_size:
            perm = order_rng.permutation(len(dataset))
            order.extend(int(i) for i in perm)
        picked = order[: train_cfg.batch_size]
        order = order[train_cfg.batch_size:]
        batch = []
        for slot, idx in enumerate(picked):
            sample = dataset[idx]
            if train_cfg.augment:
                rng = np.random.default_rng([train_cfg.seed, step, slot])
                sample = augment(sample, rng)
            batch.append(sample)
        loss = training_step(model, batch, optimizer, train_cfg.focal)
        history.append(loss)
    model.eval()

    partition = partition_parameters(model)
    log.info("final parameter partition:\n%s", partition.format_table())
    return model, history
