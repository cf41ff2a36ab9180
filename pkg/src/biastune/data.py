"""Dataset synthesis, loading, blank-label expansion, and augmentation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass
class SegmentationSample:
    """One training unit: an image, a text label, and the label's binary mask."""

    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    label: str
    mask: np.ndarray  # (H, W) uint8 in {0, 1}

    def __post_init__(self):
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError("mask shape does not match image spatial shape")
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("mask values must be binary {0, 1}")


@dataclass(frozen=True)
class ManifestEntry:
    image: str  # path relative to root
    masks: dict[str, str] = field(default_factory=dict)  # label -> relative path


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    split: str
    class_vocab: tuple[str, ...]
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> str:
        payload = {
            "split": self.split,
            "class_vocab": list(self.class_vocab),
            "entries": [{"image": e.image, "masks": e.masks} for e in self.entries],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, root: Path, text: str) -> "DatasetManifest":
        payload = json.loads(text)
        entries = tuple(
            ManifestEntry(image=e["image"], masks=dict(e["masks"]))
            for e in payload["entries"]
        )
        return cls(
            root=Path(root),
            split=payload["split"],
            class_vocab=tuple(payload["class_vocab"]),
            entries=entries,
        )


def expand_blank_labels(
    image: np.ndarray, ground_truth: dict[str, np.ndarray], vocab: tuple[str, ...]
) -> list[SegmentationSample]:
    """One sample per vocabulary label; absent labels get all-zero masks."""
    unknown = set(ground_truth) - set(vocab)
    if unknown:
        raise ValueError(f"ground-truth labels outside vocabulary: {sorted(unknown)}")
    h, w = image.shape[:2]
    samples = []
    for label in vocab:
        if label in ground_truth:
            mask = ground_truth[label].astype(np.uint8)
        else:
            mask = np.zeros((h, w), dtype=np.uint8)
        samples.append(SegmentationSample(image=image, label=label, mask=mask))
    return samples


def augment(sample: SegmentationSample, rng: np.random.Generator) -> SegmentationSample:
    """Rotation up to 10 degrees plus saturation/brightness scaling in [1/2, 2].

    Image and mask rotate identically; the mask goes through nearest-neighbor
    and is re-binarized. Pixel values are clipped back to [0, 1].
    """
    theta = rng.uniform(-10.0, 10.0)
    sat = rng.uniform(0.5, 2.0)
    bright = rng.uniform(0.5, 2.0)

    img = ndimage.rotate(
        sample.image, theta, reshape=False, order=1, mode="constant", cval=0.0
    )
    mask = ndimage.rotate(
        sample.mask.astype(np.float32), theta, reshape=False, order=0,
        mode="constant", cval=0.0,
    )
    mask = (mask > 0.5).astype(np.uint8)

    gray = (img @ _LUMA)[..., None]
    img = gray + sat * (img - gray)
    img = np.clip(img * bright, 0.0, 1.0).astype(np.float32)
    return SegmentationSample(image=img, label=sample.label, mask=mask)


# ---- synthetic shapes -------------------------------------------------------

@dataclass(frozen=True)
class ShapeSpec:
    kind: str  # disk | square | triangle | cross | ellipse
    color: tuple[float, float, float]
    size_range: tuple[float, float] = (0.12, 0.20)  # radius as fraction of image size
    color_jitter: float = 0.06
    half: str | None = None  # constrain centers to "left" / "right" image half


def default_vocab_spec() -> dict[str, ShapeSpec]:
    return {
        "disk": ShapeSpec("disk", (0.90, 0.20, 0.20)),
        "square": ShapeSpec("square", (0.20, 0.85, 0.25)),
        "triangle": ShapeSpec("triangle", (0.25, 0.40, 0.95)),
        "cross": ShapeSpec("cross", (0.95, 0.85, 0.20)),
    }


def spatial_vocab_spec() -> dict[str, ShapeSpec]:
    # identical shape and color on both sides: only location separates the labels
    disk = dict(kind="disk", color=(0.90, 0.25, 0.20), size_range=(0.12, 0.18))
    return {
        "left disk": ShapeSpec(half="left", **disk),
        "right disk": ShapeSpec(half="right", **disk),
    }


def _rasterize(kind: str, cx: float, cy: float, r: float, size: int,
               rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    dx, dy = xx - cx, yy - cy
    if kind == "disk":
        return dx ** 2 + dy ** 2 <= r ** 2
    if kind == "square":
        return np.maximum(np.abs(dx), np.abs(dy)) <= r * 0.9
    if kind == "triangle":
        return (np.abs(dy) <= r) & (np.abs(dx) <= (dy + r) / 2.0)
    if kind == "cross":
        arm = r * 0.38
        return ((np.abs(dx) <= arm) & (np.abs(dy) <= r)) | (
            (np.abs(dy) <= arm) & (np.abs(dx) <= r)
        )
    if kind == "ellipse":
        ax = r * rng.uniform(0.6, 1.0)
        ay = r * rng.uniform(0.6, 1.0)
        return (dx / ax) ** 2 + (dy / ay) ** 2 <= 1.0
    raise ValueError(f"unknown shape kind {kind!r}")


def _place_shape(spec: ShapeSpec, occupancy: np.ndarray, size: int,
                 rng: np.random.Generator) -> np.ndarray:
    for attempt in range(200):
        shrink = 0.97 ** attempt
        r = rng.uniform(*spec.size_range) * size * shrink
        r = max(r, 2.0)
        lo_x, hi_x = r + 1, size - r - 1
        if spec.half == "left":
            hi_x = size / 2 - r - 1
        elif spec.half == "right":
            lo_x = size / 2 + r + 1
        if hi_x <= lo_x:
            continue
        cx = rng.uniform(lo_x, hi_x)
        cy = rng.uniform(r + 1, size - r - 1)
        mask = _rasterize(spec.kind, cx, cy, r, size, rng)
        if mask.any() and not (mask & occupancy).any():
            return mask
    raise RuntimeError(f"could not place a non-overlapping {spec.kind!r} instance")


def render_scene(
    vocab_spec: dict[str, ShapeSpec], image_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """One synthetic image plus exact masks for the classes present in it."""
    vocab = tuple(vocab_spec)
    present = [lab for lab in vocab if rng.random() < 0.5]
    if not present:
        present = [vocab[int(rng.integers(len(vocab)))]]

    image = rng.uniform(0.0, 0.12, (image_size, image_size, 3)).astype(np.float32)
    occupancy = np.zeros((image_size, image_size), dtype=bool)
    masks: dict[str, np.ndarray] = {}
    for label in present:
        spec = vocab_spec[label]
        mask = _place_shape(spec, occupancy, image_size, rng)
        occupancy |= mask
        color = np.clip(
            np.asarray(spec.color) + rng.uniform(-1, 1, 3) * spec.color_jitter, 0, 1
        ).astype(np.float32)
        image[mask] = color
        masks[label] = mask.astype(np.uint8)
    return image, masks


def make_synthetic_dataset(
    root: str | Path,
    seed: int,
    n_images: int,
    vocab_spec: dict[str, ShapeSpec],
    split: str = "train",
    image_size: int = 64,
) -> DatasetManifest:
    """Deterministic synthetic dataset written under root/split/; returns its manifest."""
    if not vocab_spec:
        raise ValueError("vocab_spec is empty")
    if n_images <= 0:
        raise ValueError("n_images must be positive")
    root = Path(root)
    img_dir = root / split / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    vocab = tuple(vocab_spec)

    entries = []
    for i in range(n_images):
        rng = np.random.default_rng([seed, i])
        image, masks = render_scene(vocab_spec, image_size, rng)
        stem = f"{i:04d}.png"
        Image.fromarray((image * 255).round().astype(np.uint8)).save(img_dir / stem)
        mask_paths = {}
        for label, mask in masks.items():
            mdir = root / split / "masks" / label
            mdir.mkdir(parents=True, exist_ok=True)
            Image.fromarray(mask * 255).save(mdir / stem)
            mask_paths[label] = str(Path(split) / "masks" / label / stem)
        entries.append(ManifestEntry(image=str(Path(split) / "images" / stem), masks=mask_paths))

    manifest = DatasetManifest(root=root, split=split, class_vocab=vocab, entries=tuple(entries))
    (root / split / "manifest.json").write_text(manifest.to_json())
    return manifest


def load_dataset(root: str | Path, split: str, vocab: tuple[str, ...]) -> DatasetManifest:
    """Read and verify a dataset manifest; every listed file must exist."""
    root = Path(root)
    manifest_path = root / split / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing manifest: {manifest_path}")
    manifest = DatasetManifest.from_json(root, manifest_path.read_text())
    unknown = set(manifest.class_vocab) - set(vocab)
    if unknown:
        raise ValueError(f"manifest classes not in vocabulary: {sorted(unknown)}")
    for entry in manifest.entries:
        img_path = root / entry.image
        if not img_path.is_file():
            raise FileNotFoundError(f"missing image file: {img_path}")
        for label, rel in entry.masks.items():
            mask_path = root / rel
            if not mask_path.is_file():
                raise FileNotFoundError(f"missing mask file: {mask_path}")
            _read_mask(mask_path)  # validates binary content
    return manifest


def _read_mask(path: Path) -> np.ndarray:
    raw = np.asarray(Image.open(path))
    if raw.ndim != 2:
        raise ValueError(f"mask {path} must be single-channel")
    values = np.unique(raw)
    if not np.isin(values, (0, 255)).all():
        raise ValueError(f"mask {path} is not binary {{0, 255}}: found values {values[:8]}")
    return (raw > 127).astype(np.uint8)


def load_entry(
    manifest: DatasetManifest, index: int
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Image in [0, 1] plus its per-class binary masks (present classes only)."""
    entry = manifest.entries[index]
    image = np.asarray(Image.open(manifest.root / entry.image), dtype=np.float32) / 255.0
    masks = {label: _read_mask(manifest.root / rel) for label, rel in entry.masks.items()}
    return image, masks


def expanded_samples(manifest: DatasetManifest) -> list[SegmentationSample]:
    """Blank-label expansion of every manifest entry, in manifest order."""
    samples = []
    for i in range(len(manifest)):
        image, masks = load_entry(manifest, i)
        samples.extend(expand_blank_labels(image, masks, manifest.class_vocab))
    return samples
