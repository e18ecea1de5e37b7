"""Binary checkpoint format.

Layout: 8-byte magic "UDCMDL01", a little-endian uint32 byte length of a
UTF-8 JSON header (encoder config, seed, class names, tensor manifest),
then every tensor as raw little-endian float32 in manifest order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .nn import EncoderConfig, ModelState

MAGIC = b"UDCMDL01"


def _tensor_items(model: ModelState) -> list[tuple[str, np.ndarray]]:
    items = [("embedding", model.embedding.value)]
    for s in model.config.kernel_sizes:
        items.append((f"conv{s}_weight", model.conv_w[s].value))
        items.append((f"conv{s}_bias", model.conv_b[s].value))
    items.append(("fc_weight", model.fc_w.value))
    items.append(("fc_bias", model.fc_b.value))
    return items


def save_checkpoint(model: ModelState, path: str | Path) -> None:
    items = _tensor_items(model)
    header = {
        "config": {
            "num_classes": model.config.num_classes,
            "embed_dim": model.config.embed_dim,
            "kernel_sizes": list(model.config.kernel_sizes),
            "filters_per_kernel": model.config.filters_per_kernel,
            "dropout_p": model.config.dropout_p,
            "max_len": model.config.max_len,
            "pad_index": model.config.pad_index,
        },
        "vocab_size": model.vocab_size,
        "rng_seed": model.rng_seed,
        "class_names": model.class_names,
        "dtype": "float32",
        "tensors": [{"name": n, "shape": list(v.shape)} for n, v in items],
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, value in items:
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())


def load_checkpoint(
    path: str | Path, expected_config: EncoderConfig | None = None
) -> ModelState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a model checkpoint")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    if len(raw) < start + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    config = EncoderConfig(**header["config"])
    if expected_config is not None and expected_config != config:
        raise CheckpointError(
            f"{path}: checkpoint config {config} does not match expected {expected_config}"
        )
    model = ModelState(
        config,
        vocab_size=header["vocab_size"],
        rng_seed=header["rng_seed"],
        embedding_values=np.zeros((header["vocab_size"], config.embed_dim), np.float32),
    )
    model.class_names = list(header["class_names"])
    by_name = {n: v for n, v in _tensor_items(model)}
    offset = start + hlen
    for entry in header["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in by_name:
            raise CheckpointError(f"{path}: unknown tensor {name!r}")
        target = by_name[name]
        if target.shape != shape:
            raise CheckpointError(
                f"{path}: tensor {name!r} has shape {shape}, expected {target.shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated tensor data for {name!r}")
        target[...] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after tensor data")
    return model
