"""Checkpoint container and its binary file format.

Layout: magic b"TSNC", u16 version, u32 JSON length, a JSON block (model
config, training history, array manifest), the raw little-endian float32
array payload, and a trailing CRC32 over JSON plus payload. Parameters
round-trip bit-exactly for float32 models.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import InvalidConfig, ModelConfig, Network, build_model

MAGIC = b"TSNC"
VERSION = 1
_HEADER = struct.Struct("<4sHI")


class MagicMismatch(ValueError):
    """File does not start with the checkpoint magic."""


class VersionMismatch(ValueError):
    """Checkpoint version this reader does not understand."""


class ChecksumMismatch(ValueError):
    """CRC32 does not match (truncated or corrupted file)."""


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict  # name -> array; weights plus batch-norm running statistics
    optimizer_state: dict | None = None
    optimizer_step: int = 0
    history: list = field(default_factory=list)
    best_epoch: int = 0


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    names = sorted(ckpt.state)
    opt_names = sorted(ckpt.optimizer_state) if ckpt.optimizer_state else []
    meta = {
        "config": ckpt.config.to_dict(),
        "history": ckpt.history,
        "best_epoch": ckpt.best_epoch,
        "optimizer_step": ckpt.optimizer_step,
        "arrays": [{"name": n, "shape": list(ckpt.state[n].shape)} for n in names],
        "optimizer_arrays": [
            {"name": n, "shape": list(ckpt.optimizer_state[n].shape)} for n in opt_names
        ],
    }
    json_bytes = json.dumps(meta, sort_keys=True).encode()
    parts = [np.ascontiguousarray(ckpt.state[n], dtype="<f4").tobytes() for n in names]
    parts += [
        np.ascontiguousarray(ckpt.optimizer_state[n], dtype="<f4").tobytes() for n in opt_names
    ]
    payload = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(json_bytes)))
        fh.write(json_bytes)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(json_bytes + payload)))


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size or blob[:4] != MAGIC:
        raise MagicMismatch(f"{path}: not a checkpoint file")
    magic, version, json_len = _HEADER.unpack_from(blob, 0)
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    if len(blob) < _HEADER.size + json_len + 4:
        raise ChecksumMismatch(f"{path}: file shorter than its header implies")
    body = blob[_HEADER.size : -4]
    (crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch(f"{path}: CRC mismatch")
    meta = json.loads(body[:json_len].decode())
    payload = body[json_len:]
    config = ModelConfig.from_dict(meta["config"])

    offset = 0

    def take(entries):
        nonlocal offset
        out = {}
        for entry in entries:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
            offset += count * 4
            out[entry["name"]] = arr.reshape(shape).copy()
        return out

    try:
        state = take(meta["arrays"])
        optimizer_state = take(meta.get("optimizer_arrays", [])) or None
    except ValueError:
        raise ChecksumMismatch(f"{path}: array payload shorter than manifest") from None
    return Checkpoint(
        config=config,
        state=state,
        optimizer_state=optimizer_state,
        optimizer_step=meta.get("optimizer_step", 0),
        history=meta.get("history", []),
        best_epoch=meta.get("best_epoch", 0),
    )


def restore_network(ckpt: Checkpoint) -> Network:
    """Build the checkpoint's network and load its parameters into it."""
    net = build_model(ckpt.config, seed=0)
    net.load_state(ckpt.state)
    return net


def predict(ckpt: Checkpoint, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Class probability matrix for (N, channels, L) inputs."""
    return restore_network(ckpt).predict_proba(x, batch_size=batch_size)
