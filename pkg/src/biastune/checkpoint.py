"""Delta-only checkpoints: trainable arrays plus a frozen-backbone fingerprint.

The trainable set is a small fraction of the model, so checkpoints store only
it (shift biases, layer norms, positional tables, TAL with running statistics,
decoder) and refuse to load onto a base whose frozen bytes differ.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .model import PromptableSegmenter

MAGIC = b"BTDC"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _array_bytes(t: torch.Tensor) -> bytes:
    return np.ascontiguousarray(t.detach().numpy(), dtype="<f4").tobytes()


def frozen_fingerprint(model: PromptableSegmenter) -> str:
    """sha256 over the frozen parameters, in sorted-name order."""
    h = hashlib.sha256()
    for name, param in sorted(model.named_parameters()):
        if param.requires_grad:
            continue
        h.update(name.encode())
        h.update(str(tuple(param.shape)).encode())
        h.update(_array_bytes(param))
    return h.hexdigest()


def _delta_tensors(model: PromptableSegmenter) -> list[tuple[str, torch.Tensor]]:
    named = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    named.extend(model.named_buffers())  # TAL running statistics
    return sorted(named)


def save_delta_checkpoint(model: PromptableSegmenter, path: str | Path, init_seed: int) -> None:
    arrays = _delta_tensors(model)
    index = []
    offset = 0
    payload = bytearray()
    for name, tensor in arrays:
        raw = _array_bytes(tensor)
        index.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        payload.extend(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": model.cfg.to_dict(),
        "init_seed": init_seed,
        "fingerprint": frozen_fingerprint(model),
        "arrays": index,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(bytes(payload))


def _read_header_and_offset(path: str | Path) -> tuple[dict, int]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path} is not a delta checkpoint")
        (length,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(length).decode())
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {header.get('format_version')}"
        )
    return header, 4 + 4 + length


def read_header(path: str | Path) -> dict:
    return _read_header_and_offset(path)[0]


def checkpoint_model_config(path: str | Path) -> tuple[ModelConfig, int]:
    header = read_header(path)
    cfg_dict = dict(header["model_config"])
    cfg_dict["class_vocab"] = tuple(cfg_dict["class_vocab"])
    return ModelConfig(**cfg_dict), int(header["init_seed"])


def load_delta_checkpoint(path: str | Path, model: PromptableSegmenter) -> None:
    """Copy trainable arrays into a model whose frozen fingerprint matches."""
    header, payload_start = _read_header_and_offset(path)
    actual = frozen_fingerprint(model)
    if header["fingerprint"] != actual:
        raise CheckpointError(
            "frozen-backbone fingerprint mismatch: checkpoint "
            f"{header['fingerprint'][:12]}... vs model {actual[:12]}..."
        )
    targets = dict(_delta_tensors(model))
    names = {entry["name"] for entry in header["arrays"]}
    if names != set(targets):
        missing = sorted(set(targets) - names)
        extra = sorted(names - set(targets))
        raise CheckpointError(f"array set mismatch: missing={missing} extra={extra}")
    data = Path(path).read_bytes()
    for entry in header["arrays"]:
        tensor = targets[entry["name"]]
        shape = tuple(entry["shape"])
        if tuple(tensor.shape) != shape:
            raise CheckpointError(
                f"shape mismatch for {entry['name']}: file {shape}, model {tuple(tensor.shape)}"
            )
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = payload_start + entry["offset"]
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=start).reshape(shape)
        with torch.no_grad():
            tensor.copy_(torch.from_numpy(arr.copy()))
