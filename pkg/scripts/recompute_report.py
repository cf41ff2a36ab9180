#!/usr/bin/env python3
"""Recompute per-class DSC/IoU from dumped prediction masks, from scratch.

Reads the {0,255} PNGs written by the evaluator's dump mode plus the dataset's
own mask files, and rebuilds the report with explicit pixel-set counting. No
imports from the package: this is the out-of-band check.
"""

import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image


def _load_binary(path: Path) -> np.ndarray:
    arr = np.asarray(Image.open(path))
    return arr > 127


def _score(gt: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    inter = int(np.logical_and(gt, pred).sum())
    union = int(np.logical_or(gt, pred).sum())
    total = int(gt.sum()) + int(pred.sum())
    d = 1.0 if total == 0 else 2.0 * inter / total
    j = 1.0 if union == 0 else inter / union
    return d, j


def recompute(pred_dir, data_root, split, vocab):
    pred_dir, data_root = Path(pred_dir), Path(data_root)
    manifest = json.loads((data_root / split / "manifest.json").read_text())
    rows = []
    for label in vocab:
        scores = []
        for i, entry in enumerate(manifest["entries"]):
            pred_path = pred_dir / label.replace(" ", "_") / f"{i:04d}.png"
            pred = _load_binary(pred_path)
            if label in entry["masks"]:
                gt = _load_binary(data_root / entry["masks"][label])
            else:
                gt = np.zeros_like(pred)
            scores.append(_score(gt, pred))
        rows.append((
            label,
            float(np.mean([d for d, _ in scores])),
            float(np.mean([j for _, j in scores])),
        ))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pred-dir", required=True)
    ap.add_argument("--data-root", required=True)
    ap.add_argument("--split", default="train")
    ap.add_argument("--vocab", required=True, help="comma-separated labels")
    args = ap.parse_args()
    rows = recompute(args.pred_dir, args.data_root, args.split, args.vocab.split(","))
    print("label,dsc,iou")
    for label, d, j in rows:
        print(f"{label},{d!r},{j!r}")


if __name__ == "__main__":
    main()
