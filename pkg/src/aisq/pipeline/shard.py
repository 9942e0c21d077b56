"""Binary shard container for feature sequences.

Layout (all integers little-endian):

    magic   4 bytes  b"AISQ"
    version u16      currently 1
    count   u32      number of sequences
    payload          per sequence: u32 L, u32 true_length, u8 label,
                     u32 mmsi hash, then L*9 float32 values (row-major)
    crc     u32      CRC32 of the payload bytes
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .features import FEATURE_CHANNELS, FeatureSequence
from .segmentation import ClassLabel

MAGIC = b"AISQ"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_SEQ_HEADER = struct.Struct("<IIBI")


class MagicMismatch(ValueError):
    """File does not start with the shard magic."""


class VersionMismatch(ValueError):
    """Shard version this reader does not understand."""


class ChecksumMismatch(ValueError):
    """Payload CRC32 does not match (truncated or corrupted file)."""


def _mmsi_hash(mmsi: int) -> int:
    # 30-bit MMSIs fit the u32 field as-is; wider values wrap.
    return mmsi & 0xFFFFFFFF


def write_shard(sequences: list[FeatureSequence], path: str | Path) -> None:
    """Serialize sequences; the written file round-trips bit-exactly."""
    parts = []
    for s in sequences:
        values = np.ascontiguousarray(s.values, dtype="<f4")
        if values.ndim != 2 or values.shape[1] != len(FEATURE_CHANNELS):
            raise ValueError(f"sequence {s.source_id!r}: expected (L, 9) values")
        parts.append(
            _SEQ_HEADER.pack(values.shape[0], s.true_length, int(s.label), _mmsi_hash(s.mmsi))
        )
        parts.append(values.tobytes())
    payload = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(sequences)))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def read_shard(path: str | Path, transform_tag: str = "rtf") -> list[FeatureSequence]:
    """Read a shard back into FeatureSequence objects.

    The transform tag is not stored per sequence; callers that know the
    dataset manifest pass its tag to stamp the sequences.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 4 or blob[:4] != MAGIC:
        raise MagicMismatch(f"{path}: not a shard file")
    magic, version, count = _HEADER.unpack_from(blob, 0)
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    payload = blob[_HEADER.size : -4]
    (crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(payload) != crc:
        raise ChecksumMismatch(f"{path}: payload CRC mismatch")
    sequences = []
    offset = 0
    for _ in range(count):
        if offset + _SEQ_HEADER.size > len(payload):
            raise ChecksumMismatch(f"{path}: payload shorter than sequence count implies")
        seq_len, true_length, label, mmsi = _SEQ_HEADER.unpack_from(payload, offset)
        offset += _SEQ_HEADER.size
        nbytes = seq_len * len(FEATURE_CHANNELS) * 4
        if offset + nbytes > len(payload):
            raise ChecksumMismatch(f"{path}: payload shorter than sequence count implies")
        values = np.frombuffer(payload, dtype="<f4", count=seq_len * len(FEATURE_CHANNELS), offset=offset)
        offset += nbytes
        sequences.append(
            FeatureSequence(
                values=values.reshape(seq_len, len(FEATURE_CHANNELS)).copy(),
                true_length=true_length,
                label=ClassLabel(label),
                mmsi=mmsi,
                source_id="",
                transform_tag=transform_tag,
            )
        )
    return sequences
