"""Binary shard round trips and corruption detection."""

import struct

import numpy as np
import pytest

from aisq.pipeline import shard
from aisq.pipeline.features import FeatureSequence
from aisq.pipeline.segmentation import ClassLabel


def make_sequences(n, seq_len=12, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        true_length = int(rng.integers(1, seq_len + 1))
        values = np.zeros((seq_len, 9), dtype=np.float32)
        values[:true_length] = rng.random((true_length, 9), dtype=np.float32)
        out.append(
            FeatureSequence(
                values=values,
                true_length=true_length,
                label=ClassLabel(int(rng.integers(0, 5))),
                mmsi=int(rng.integers(0, 1 << 30)),
                source_id=f"{i}",
                transform_tag="rtf",
            )
        )
    return out


def test_round_trip_bitwise(tmp_path):
    path = tmp_path / "x.shard"
    original = make_sequences(10)
    shard.write_shard(original, path)
    loaded = shard.read_shard(path)
    assert len(loaded) == 10
    for a, b in zip(original, loaded):
        assert np.array_equal(a.values, b.values)
        assert a.values.tobytes() == b.values.tobytes()
        assert a.true_length == b.true_length
        assert a.label == b.label
        assert a.mmsi == b.mmsi


def test_empty_shard(tmp_path):
    path = tmp_path / "x.shard"
    shard.write_shard([], path)
    assert shard.read_shard(path) == []


def test_truncated_file(tmp_path):
    path = tmp_path / "x.shard"
    shard.write_shard(make_sequences(5), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(shard.ChecksumMismatch):
        shard.read_shard(path)


def test_flipped_payload_byte(tmp_path):
    path = tmp_path / "x.shard"
    shard.write_shard(make_sequences(3), path)
    blob = bytearray(path.read_bytes())
    blob[30] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(shard.ChecksumMismatch):
        shard.read_shard(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "x.shard"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(shard.MagicMismatch):
        shard.read_shard(path)


def test_bad_version(tmp_path):
    path = tmp_path / "x.shard"
    shard.write_shard([], path)
    blob = bytearray(path.read_bytes())
    blob[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(shard.VersionMismatch):
        shard.read_shard(path)


def test_transform_tag_stamped(tmp_path):
    path = tmp_path / "x.shard"
    shard.write_shard(make_sequences(2), path)
    assert all(s.transform_tag == "rtz" for s in shard.read_shard(path, transform_tag="rtz"))
