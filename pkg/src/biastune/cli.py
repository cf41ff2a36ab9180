"""Command-line entry points: synth, train, eval, predict, budget."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from . import checkpoint as ckpt
from .config import ConfigError, load_run_config, toy_model_config, vit_base_like_config
from .data import (
    default_vocab_spec,
    expanded_samples,
    load_dataset,
    make_synthetic_dataset,
    spatial_vocab_spec,
)
from .eval import binarize, evaluate
from .model import PromptableSegmenter
from .tuning import fit, partition_parameters

log = logging.getLogger(__name__)


def _cap_threads() -> None:
    raw = os.environ.get("BIASTUNE_THREADS")
    if raw:
        try:
            n = max(1, int(raw))
        except ValueError:
            raise ConfigError(f"BIASTUNE_THREADS must be an integer, got {raw!r}")
        torch.set_num_threads(min(n, torch.get_num_threads()))


def cmd_synth(args) -> int:
    if args.n <= 0:
        print("error: --n must be positive", file=sys.stderr)
        return 1
    spec = spatial_vocab_spec() if args.spatial else default_vocab_spec()
    manifest = make_synthetic_dataset(
        args.out, seed=args.seed, n_images=args.n, vocab_spec=spec,
        split=args.split, image_size=args.image_size,
    )
    print(f"wrote {len(manifest)} images under {args.out}/{args.split}")
    return 0


def cmd_train(args) -> int:
    run = load_run_config(args.config)
    seed = args.seed if args.seed is not None else run.seed
    out_dir = Path(args.out) if args.out else run.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = load_dataset(run.data_root, run.split, run.model.class_vocab)
    dataset = expanded_samples(manifest)
    model = PromptableSegmenter(run.model, init_seed=seed)
    train_cfg = run.train if args.seed is None else \
        type(run.train)(**{**run.train.__dict__, "seed": seed})
    model, history = fit(train_cfg, dataset, model)

    ckpt.save_delta_checkpoint(model, out_dir / "checkpoint.btck", init_seed=seed)
    with open(out_dir / "loss.csv", "w") as f:
        f.write("step,loss\n")
        for step, loss in enumerate(history):
            f.write(f"{step},{loss!r}\n")
    partition = partition_parameters(model)
    (out_dir / "partition.json").write_text(partition.to_json() + "\n")
    print(f"trained {len(history)} steps; outputs in {out_dir}")
    return 0


def _model_from_checkpoint(path: str | Path) -> PromptableSegmenter:
    cfg, init_seed = ckpt.checkpoint_model_config(path)
    model = PromptableSegmenter(cfg, init_seed=init_seed)
    ckpt.load_delta_checkpoint(path, model)
    return model


def cmd_eval(args) -> int:
    _cap_threads()
    run = load_run_config(args.config)
    model = _model_from_checkpoint(args.checkpoint)
    manifest = load_dataset(run.data_root, run.split, model.cfg.class_vocab)
    report = evaluate(
        model, manifest, model.cfg.class_vocab, mask_threshold=model.cfg.mask_threshold
    )
    out_dir = Path(args.out) if args.out else run.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report.to_csv())
    print(report.format_table())
    return 0


def cmd_predict(args) -> int:
    _cap_threads()
    model = _model_from_checkpoint(args.checkpoint)
    image_path = Path(args.image)
    if not image_path.is_file():
        print(f"error: no such image: {image_path}", file=sys.stderr)
        return 1
    image = np.asarray(Image.open(image_path).convert("RGB"), dtype=np.float32) / 255.0
    logits = model.forward(image, args.prompt)
    mask = binarize(logits, model.cfg.mask_threshold)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask * 255).save(out_dir / "mask.png")
    overlay = (image * 255).astype(np.float32)
    tint = np.array([255.0, 40.0, 40.0])
    overlay[mask.astype(bool)] = 0.55 * overlay[mask.astype(bool)] + 0.45 * tint
    Image.fromarray(overlay.round().astype(np.uint8)).save(out_dir / "overlay.png")
    frac = float(mask.mean())
    print(f"prompt {args.prompt!r}: {frac:.1%} foreground; wrote mask.png and overlay.png")
    return 0


def cmd_budget(args) -> int:
    if args.config:
        cfg = load_run_config(args.config).model
    elif args.preset == "vit-base-like":
        cfg = vit_base_like_config()
    else:
        cfg = toy_model_config()
    model = PromptableSegmenter(cfg, init_seed=args.seed)
    partition = partition_parameters(model)
    print(partition.format_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="biastune", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a deterministic synthetic shape dataset")
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=16, help="number of images")
    p.add_argument("--split", default="train")
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--spatial", action="store_true",
                   help="left/right disk vocabulary instead of the shape vocabulary")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="bias-tune on a dataset, write a delta checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the config output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint, write a class report")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="segment one image with a text prompt")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("budget", help="print the parameter partition for a config")
    p.add_argument("--config", default=None)
    p.add_argument("--preset", choices=["toy", "vit-base-like"], default="toy")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_budget)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ckpt.CheckpointError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
