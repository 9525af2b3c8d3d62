"""Bit-exact model persistence.

File layout: magic bytes ``ALAE-TOY\\x01``, a little-endian uint32
manifest length, a UTF-8 JSON manifest, then all tensors packed
contiguously as little-endian float32 in manifest order. The manifest
records name, dtype, shape and byte offset per tensor plus free-form
metadata (latent width, image size, training seed, dataset descriptor).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import (CheckpointFormatError, CheckpointTruncationError,
                     CheckpointVersionError)
from .model import GenerativeAutoencoder, ModelConfig

MAGIC = b"ALAE-TOY\x01"
FORMAT_VERSION = 1


def save_checkpoint(model: GenerativeAutoencoder, path: str | Path) -> None:
    """Write the model's weights and metadata to ``path``.

    Weights are stored as little-endian float32; models already in
    float32 (the default) round-trip bit-exactly.
    """
    tensors = []
    blobs = []
    offset = 0
    for name, arr in model.weights().items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        tensors.append({"name": name, "dtype": "float32",
                        "shape": list(arr.shape), "offset": offset})
        blobs.append(data.tobytes())
        offset += len(blobs[-1])
    manifest = {
        "format_version": FORMAT_VERSION,
        "metadata": {
            "d_w": model.config.d_w,
            "image_size": model.config.image_size,
            **model.metadata,
        },
        "tensors": tensors,
    }
    payload = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> GenerativeAutoencoder:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic bytes")
    (mlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    mstart = len(MAGIC) + 4
    if len(raw) < mstart + mlen:
        raise CheckpointTruncationError(f"{path}: manifest truncated")
    try:
        manifest = json.loads(raw[mstart:mstart + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: manifest is not valid JSON") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {version!r}, this build reads {FORMAT_VERSION}")
    meta = manifest.get("metadata", {})
    try:
        config = ModelConfig(d_w=int(meta["d_w"]), image_size=int(meta["image_size"]))
    except KeyError as exc:
        raise CheckpointFormatError(f"{path}: metadata missing {exc}") from exc

    blob = raw[mstart + mlen:]
    loaded: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        if entry.get("dtype") != "float32":
            raise CheckpointFormatError(
                f"{path}: unsupported tensor dtype {entry.get('dtype')!r}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        off = int(entry["offset"])
        if off < 0 or off + nbytes > len(blob):
            raise CheckpointTruncationError(
                f"{path}: tensor {entry['name']!r} needs bytes "
                f"[{off}, {off + nbytes}) but blob has {len(blob)}")
        arr = np.frombuffer(blob, dtype="<f4", count=nbytes // 4, offset=off)
        loaded[entry["name"]] = arr.reshape(shape).copy()

    model = GenerativeAutoencoder.build(config, seed=int(meta.get("init_seed", 0)))
    model.metadata = {k: v for k, v in meta.items() if k not in ("d_w", "image_size")}
    expected = model.weights()
    if set(loaded) != set(expected):
        missing = sorted(set(expected) - set(loaded))
        extra = sorted(set(loaded) - set(expected))
        raise CheckpointFormatError(
            f"{path}: tensor names do not match the architecture "
            f"(missing {missing[:3]}, unexpected {extra[:3]})")
    for name, arr in loaded.items():
        if arr.shape != expected[name].shape:
            raise CheckpointFormatError(
                f"{path}: tensor {name!r} has shape {arr.shape}, "
                f"expected {expected[name].shape}")
    for net in (model.encoder, model.mapping, model.decoder):
        for pname in net.params:
            net.params[pname] = loaded[f"{net.scope}/{pname}"]
    model.mode = "eval"
    return model
