"""Dataclass configs and the sectioned key=value run-config file format."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Raised for malformed configs: bad values, unknown keys, missing sections."""


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    depth: int = 2
    num_heads: int = 4
    mlp_ratio: float = 4.0
    text_dim: int = 32
    prompt_dim: int = 64
    decoder_depth: int = 2
    class_vocab: tuple[str, ...] = ("disk", "square", "triangle", "cross")
    mask_threshold: float = 0.5

    def __post_init__(self):
        if self.image_size <= 0 or self.patch_size <= 0:
            raise ConfigError("image_size and patch_size must be positive")
        if self.image_size % self.patch_size != 0:
            raise ConfigError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        if self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}"
            )
        if not self.class_vocab:
            raise ConfigError("class_vocab must be non-empty")
        if len(set(self.class_vocab)) != len(self.class_vocab):
            raise ConfigError("class_vocab entries must be unique")
        if not 0.0 < self.mask_threshold < 1.0:
            raise ConfigError("mask_threshold must lie in (0, 1)")
        if min(self.depth, self.decoder_depth, self.text_dim, self.prompt_dim) < 1:
            raise ConfigError("depth, decoder_depth, text_dim, prompt_dim must be >= 1")
        if int(self.mlp_ratio * self.embed_dim) < 1:
            raise ConfigError("mlp_ratio * embed_dim must be >= 1")
        object.__setattr__(self, "class_vocab", tuple(self.class_vocab))

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid_size ** 2

    @property
    def mlp_hidden(self) -> int:
        return int(self.mlp_ratio * self.embed_dim)

    @property
    def decoder_mlp_hidden(self) -> int:
        return int(self.mlp_ratio * self.prompt_dim)

    @property
    def decoder_heads(self) -> int:
        heads = max(1, self.prompt_dim // 32)
        while heads > 1 and self.prompt_dim % heads != 0:
            heads -= 1
        return heads

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["class_vocab"] = list(self.class_vocab)
        return d


@dataclass(frozen=True)
class FocalLossConfig:
    alpha: float = 0.75
    gamma: float = 3.0
    eps: float = 1e-7

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("focal alpha must lie in [0, 1]")
        if self.gamma < 0.0:
            raise ConfigError("focal gamma must be >= 0")
        if not 0.0 < self.eps <= 1e-3:
            raise ConfigError("focal eps must lie in (0, 1e-3]")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-4
    max_steps: int = 500
    seed: int = 0
    focal: FocalLossConfig = field(default_factory=FocalLossConfig)
    augment: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (TAL batch statistics)")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be > 0")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    data_root: Path
    split: str
    seed: int
    out_dir: Path


def toy_model_config(vocab: tuple[str, ...] | None = None) -> ModelConfig:
    return ModelConfig(class_vocab=vocab or ("disk", "square", "triangle", "cross"))


def vit_base_like_config() -> ModelConfig:
    """SAM-scale geometry: ViT-base encoder, CLIP-width text, lightweight decoder."""
    return ModelConfig(
        image_size=1024, patch_size=16, embed_dim=768, depth=12, num_heads=12,
        mlp_ratio=4.0, text_dim=512, prompt_dim=128, decoder_depth=2,
        class_vocab=("disk", "square", "triangle", "cross"),
    )


_MODEL_KEYS = {
    "image_size": int, "patch_size": int, "embed_dim": int, "depth": int,
    "num_heads": int, "mlp_ratio": float, "text_dim": int, "prompt_dim": int,
    "decoder_depth": int, "class_vocab": str, "mask_threshold": float,
}
_TRAIN_KEYS = {
    "batch_size": int, "learning_rate": float, "max_steps": int, "seed": int,
    "alpha": float, "gamma": float, "eps": float, "augment": str,
}
_DATA_KEYS = {"root": str, "split": str}
_RUN_KEYS = {"seed": int, "out": str}

_SECTIONS = {"model": _MODEL_KEYS, "train": _TRAIN_KEYS, "data": _DATA_KEYS, "run": _RUN_KEYS}


def _parse_section(parser: configparser.ConfigParser, section: str) -> dict:
    known = _SECTIONS[section]
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in section [{section}]")
        typ = known[key]
        try:
            out[key] = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}' in [{section}]: {raw!r}") from exc
    return out


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean value: {raw!r}")


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a sectioned key=value file. Unknown sections or keys are hard errors."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in {path}")

    mk = _parse_section(parser, "model")
    if "class_vocab" in mk:
        vocab = tuple(v.strip() for v in mk["class_vocab"].split(",") if v.strip())
        mk["class_vocab"] = vocab
    model = ModelConfig(**mk)

    tk = _parse_section(parser, "train")
    focal_kwargs = {k: tk.pop(k) for k in ("alpha", "gamma", "eps") if k in tk}
    if "augment" in tk:
        tk["augment"] = _parse_bool(tk["augment"])
    train = TrainConfig(focal=FocalLossConfig(**focal_kwargs), **tk)

    dk = _parse_section(parser, "data")
    rk = _parse_section(parser, "run")
    return RunConfig(
        model=model,
        train=train,
        data_root=Path(dk.get("root", "data")),
        split=dk.get("split", "train"),
        seed=rk.get("seed", train.seed),
        out_dir=Path(rk.get("out", "runs/out")),
    )
