"""DSC/IoU with empty-mask conventions, binarization, argmax masks, reports."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.special import expit

from .data import DatasetManifest, load_entry


def _check_mask(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m)
    if not np.isin(m, (0, 1)).all():
        raise ValueError(f"{name} must be a binary mask")
    return m.astype(bool)


def _check_pair(y: np.ndarray, y_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = _check_mask(y, "ground truth")
    y_hat = _check_mask(y_hat, "prediction")
    if y.shape != y_hat.shape:
        raise ValueError(f"mask shapes differ: {y.shape} vs {y_hat.shape}")
    return y, y_hat


def dsc(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Dice score; defined as 1 when both masks are empty."""
    y, y_hat = _check_pair(y, y_hat)
    denom = int(y.sum()) + int(y_hat.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((y & y_hat).sum()) / denom


def iou(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Intersection over union; defined as 1 when the union is empty."""
    y, y_hat = _check_pair(y, y_hat)
    union = int((y | y_hat).sum())
    if union == 0:
        return 1.0
    return int((y & y_hat).sum()) / union


def binarize(logits: np.ndarray, threshold: float) -> np.ndarray:
    """Foreground where sigmoid(logit) >= threshold; the boundary is inclusive."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return (expit(np.asarray(logits, dtype=np.float64)) >= threshold).astype(np.uint8)


def final_mask(scores: np.ndarray, class_index: int) -> np.ndarray:
    """Per-class binary mask from (C, H, W) scores via per-pixel argmax.

    Ties go to the lowest class index.
    """
    scores = np.asarray(scores)
    if scores.ndim != 3:
        raise ValueError("expected (C, H, W) score maps")
    if not 0 <= class_index < scores.shape[0]:
        raise ValueError(f"class index {class_index} out of range for C={scores.shape[0]}")
    return (np.argmax(scores, axis=0) == class_index).astype(np.uint8)


@dataclass(frozen=True)
class ClassReport:
    rows: tuple[tuple[str, float, float], ...]  # (label, mean DSC, mean IoU)

    @property
    def avg_dsc(self) -> float:
        return float(np.mean([r[1] for r in self.rows]))

    @property
    def avg_iou(self) -> float:
        return float(np.mean([r[2] for r in self.rows]))

    def to_csv(self) -> str:
        lines = ["label,dsc,iou"]
        for label, d, i in self.rows:
            lines.append(f"{label},{d!r},{i!r}")
        lines.append(f"Avg.,{self.avg_dsc!r},{self.avg_iou!r}")
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        width = max(len(r[0]) for r in self.rows + (("Avg.", 0, 0),))
        lines = [f"{'object':{width}s}  DSC[IoU]"]
        for label, d, i in self.rows:
            lines.append(f"{label:{width}s}  {d:.2f}[{i:.2f}]")
        lines.append(f"{'Avg.':{width}s}  {self.avg_dsc:.2f}[{self.avg_iou:.2f}]")
        return "\n".join(lines)


def evaluate(
    model,
    manifest: DatasetManifest,
    vocab: tuple[str, ...],
    mask_threshold: float = 0.5,
    dump_dir: str | Path | None = None,
) -> ClassReport:
    """Prompt the model with every vocab label on every image and score the masks.

    Absent classes are scored against blank ground truth, exercising the
    empty-mask conventions. Predictions are optionally dumped as {0, 255} PNGs
    for out-of-band recomputation.
    """
    dump = Path(dump_dir) if dump_dir is not None else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    per_class: dict[str, list[tuple[float, float]]] = {label: [] for label in vocab}
    for i in range(len(manifest)):
        image, gt_masks = load_entry(manifest, i)
        for label in vocab:
            logits = model.forward(image, label)
            pred = binarize(logits, mask_threshold)
            gt = gt_masks.get(
                label, np.zeros(image.shape[:2], dtype=np.uint8)
            )
            per_class[label].append((dsc(gt, pred), iou(gt, pred)))
            if dump is not None:
                sub = dump / label.replace(" ", "_")
                sub.mkdir(exist_ok=True)
                Image.fromarray(pred * 255).save(sub / f"{i:04d}.png")
    rows = tuple(
        (label, float(np.mean([d for d, _ in per_class[label]])),
         float(np.mean([j for _, j in per_class[label]])))
        for label in vocab
    )
    return ClassReport(rows=rows)
