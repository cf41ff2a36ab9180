#!/usr/bin/env python3
"""Independent parameter-count oracle.

Walks the model's config arithmetic with plain integers, no torch and no
package imports, so it can cross-check partition_parameters from the outside.
Category names match the partition categories one to one.
"""

import argparse


def attention_params(dim: int) -> int:
    # q, k, v, out projections, each dim x dim with bias
    return 4 * (dim * dim + dim)


def count_params(
    image_size: int,
    patch_size: int,
    embed_dim: int,
    depth: int,
    mlp_ratio: float,
    text_dim: int,
    prompt_dim: int,
    decoder_depth: int,
) -> dict:
    """Per-category parameter counts for one model configuration."""
    grid = image_size // patch_size
    hidden = int(mlp_ratio * embed_dim)

    frozen = 0
    # patch projection: conv weight + bias
    frozen += embed_dim * 3 * patch_size * patch_size + embed_dim
    # per encoder block: qkv, attention out, both MLP affines (weights + biases)
    per_block = (
        3 * embed_dim * embed_dim + 3 * embed_dim
        + embed_dim * embed_dim + embed_dim
        + embed_dim * hidden + hidden
        + hidden * embed_dim + embed_dim
    )
    frozen += depth * per_block
    # frozen prompt encoder affine
    frozen += prompt_dim * prompt_dim + prompt_dim

    # one shift per affine output: patch embed, qkv, attention out, both MLP layers
    shift = embed_dim + depth * (3 * embed_dim + embed_dim + hidden + embed_dim)

    # two LayerNorms per block plus the final encoder norm, scale + offset each
    layer_norm = depth * 4 * embed_dim + 2 * embed_dim

    # factorized positional tables: rows + columns
    pos = 2 * grid * embed_dim

    # text affine layer: weight, bias, batch-norm gamma/beta
    tal = text_dim * prompt_dim + 3 * prompt_dim

    d = prompt_dim
    up1 = max(d // 4, 1)
    up2 = max(d // 8, 1)
    dec_hidden = int(mlp_ratio * d)
    decoder = 0
    decoder += embed_dim * d + d          # image-token projection
    decoder += d                          # learned mask token
    per_two_way = (
        3 * attention_params(d)           # self, tokens->image, image->tokens
        + d * dec_hidden + dec_hidden + dec_hidden * d + d
        + 4 * 2 * d                       # four LayerNorms
    )
    decoder += decoder_depth * per_two_way
    decoder += attention_params(d) + 2 * d  # final tokens->image attention + norm
    decoder += d * d + d + d * up2 + up2    # hypernetwork MLP
    decoder += d * up1 * 4 + up1            # upscale conv-transpose 1 (2x2 kernel)
    decoder += 2 * up1                      # channel norm between upscales
    decoder += up1 * up2 * 4 + up2          # upscale conv-transpose 2

    counts = {
        "frozen-backbone": frozen,
        "shift-bias": shift,
        "layer-norm": layer_norm,
        "positional-embedding": pos,
        "tal": tal,
        "decoder": decoder,
    }
    return counts


def trainable_ratio(counts: dict) -> float:
    total = sum(counts.values())
    trainable = total - counts["frozen-backbone"]
    return trainable / total


PRESETS = {
    "vit-base-like": dict(
        image_size=1024, patch_size=16, embed_dim=768, depth=12,
        mlp_ratio=4, text_dim=512, prompt_dim=128, decoder_depth=2,
    ),
    "toy": dict(
        image_size=64, patch_size=8, embed_dim=64, depth=2,
        mlp_ratio=4, text_dim=32, prompt_dim=64, decoder_depth=2,
    ),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=sorted(PRESETS), default=None)
    ap.add_argument("--image-size", type=int)
    ap.add_argument("--patch-size", type=int)
    ap.add_argument("--embed-dim", type=int)
    ap.add_argument("--depth", type=int)
    ap.add_argument("--mlp-ratio", type=float, default=4.0)
    ap.add_argument("--text-dim", type=int)
    ap.add_argument("--prompt-dim", type=int)
    ap.add_argument("--decoder-depth", type=int, default=2)
    args = ap.parse_args()

    if args.preset:
        kwargs = PRESETS[args.preset]
    else:
        required = ["image_size", "patch_size", "embed_dim", "depth", "text_dim", "prompt_dim"]
        missing = [k for k in required if getattr(args, k) is None]
        if missing:
            ap.error("need --preset or all of: " + ", ".join(missing))
        kwargs = dict(
            image_size=args.image_size, patch_size=args.patch_size,
            embed_dim=args.embed_dim, depth=args.depth, mlp_ratio=args.mlp_ratio,
            text_dim=args.text_dim, prompt_dim=args.prompt_dim,
            decoder_depth=args.decoder_depth,
        )

    counts = count_params(**kwargs)
    total = sum(counts.values())
    for cat, n in counts.items():
        print(f"{cat:22s} {n:>12,d}")
    print(f"{'total':22s} {total:>12,d}")
    print(f"trainable_ratio {trainable_ratio(counts):.6f}")


if __name__ == "__main__":
    main()
