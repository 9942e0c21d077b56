"""Deterministic dataset builds: tracks in, shards plus manifest out.

The build is a pure function of (tracks, reference geometry, config): vessels
are processed in MMSI order, per-vessel work may fan out to threads, results
are merged back in order, and the only randomness is the seeded shuffle that
assigns train/validation/test splits. Two builds from identical inputs and
seed produce byte-identical shards.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..geo import GeoGridIndex, GeoPoint, RiverMask, build_index, build_river_mask
from ..records import VesselTrack
from .features import (
    FEATURE_CHANNELS,
    FIXED_BOUNDS,
    FeatureSequence,
    NormalizationSpec,
    compute_features,
    normalize,
    pad_to_length,
    positional_bounds,
)
from .segmentation import (
    CLASS_NAMES,
    ClassLabel,
    UnmappedShipType,
    chunk,
    is_stationary,
    map_class,
    on_river,
    segment,
)
from .shard import read_shard, write_shard

MANIFEST_NAME = "manifest.json"
SPLIT_NAMES = ("train", "val", "test")
SPLIT_FRACTIONS = (0.64, 0.16, 0.20)


class EmptyDataset(ValueError):
    """No sequences survived the pipeline."""


@dataclass
class PipelineConfig:
    """Everything that determines a dataset build, recorded in the manifest."""

    seq_len: int = 360
    transform: str = "rtf"  # rtf | rtz
    norm_mode: str = "global"  # global | local
    split_mode: str = "sequence"  # sequence | vessel
    seed: int = 0
    time_gap_s: float = 7200.0
    dist_sq_deg: float = 1e-4
    stationary_threshold: float = 2e-5
    river_fraction: float = 0.5
    river_buffer_m: float = 200.0
    min_chunk_fraction: float = 0.8
    coast_cell_km: float = 40.0
    harbor_cell_km: float = 5000.0
    coast_max_points: int | None = None
    workers: int = 1


def _process_track(
    track: VesselTrack,
    cfg: PipelineConfig,
    coast_index: GeoGridIndex,
    harbor_index: GeoGridIndex,
    river_mask: RiverMask | None,
) -> tuple[list[dict], dict]:
    """Segment, chunk, filter, and featurize one vessel; pure and thread-safe."""
    counters = {
        "segments": 0,
        "chunks": 0,
        "discarded_leftover_chunks": 0,
        "discarded_leftover_samples": 0,
        "dropped_stationary": 0,
        "dropped_river": 0,
        "dropped_unmapped": 0,
        "degenerate_endpoints": 0,
    }
    entries = []
    segments = segment(track, cfg.time_gap_s, cfg.dist_sq_deg)
    counters["segments"] += len(segments)
    for seg in segments:
        chunks = chunk(seg, cfg.seq_len, cfg.min_chunk_fraction)
        kept_samples = sum(c.true_length for c in chunks)
        if len(seg) > kept_samples:
            counters["discarded_leftover_chunks"] += 1
            counters["discarded_leftover_samples"] += len(seg) - kept_samples
        counters["chunks"] += len(chunks)
        for ck in chunks:
            if ck.true_length < 2 or is_stationary(ck, cfg.stationary_threshold):
                counters["dropped_stationary"] += 1
                continue
            if river_mask is not None and on_river(ck, river_mask, cfg.river_fraction):
                counters["dropped_river"] += 1
                continue
            try:
                label = map_class(ck.shiptype)
            except UnmappedShipType:
                counters["dropped_unmapped"] += 1
                continue
            matrix, degenerate = compute_features(ck, coast_index, harbor_index, cfg.transform)
            if degenerate:
                counters["degenerate_endpoints"] += 1
            entries.append(
                {
                    "mmsi": ck.mmsi,
                    "source_id": ck.source_id,
                    "label": label,
                    "matrix": matrix,
                    "true_length": ck.true_length,
                }
            )
    return entries, counters


def _split_counts(n: int) -> tuple[int, int, int]:
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_val = int(round(SPLIT_FRACTIONS[1] * n))
    return n_train, n_val, n - n_train - n_val


def _assign_splits(entries: list[dict], cfg: PipelineConfig, rng: np.random.Generator) -> list[str]:
    """Split assignment per entry, either by shuffled sequence or whole vessel."""
    n = len(entries)
    if cfg.split_mode == "sequence":
        order = rng.permutation(n)
        n_train, n_val, _ = _split_counts(n)
        assignment = [""] * n
        for rank, i in enumerate(order):
            if rank < n_train:
                assignment[i] = "train"
            elif rank < n_train + n_val:
                assignment[i] = "val"
            else:
                assignment[i] = "test"
        return assignment
    if cfg.split_mode == "vessel":
        mmsis = sorted({e["mmsi"] for e in entries})
        order = rng.permutation(len(mmsis))
        per_vessel = {m: sum(1 for e in entries if e["mmsi"] == m) for m in mmsis}
        n_train, n_val, _ = _split_counts(n)
        vessel_split: dict[int, str] = {}
        placed = 0
        for k in order:
            m = mmsis[k]
            if placed < n_train:
                vessel_split[m] = "train"
            elif placed < n_train + n_val:
                vessel_split[m] = "val"
            else:
                vessel_split[m] = "test"
            placed += per_vessel[m]
        return [vessel_split[e["mmsi"]] for e in entries]
    raise ValueError(f"unknown split mode {cfg.split_mode!r}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def build_dataset(
    tracks: list[VesselTrack],
    coast_points: list[GeoPoint],
    harbor_points: list[GeoPoint],
    river_points: list[GeoPoint] | None,
    cfg: PipelineConfig,
    out_dir: str | Path,
) -> dict:
    """Run the full pipeline and write shards plus manifest into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coast_index = build_index(coast_points, cfg.coast_cell_km)
    harbor_index = build_index(harbor_points, cfg.harbor_cell_km)
    river_mask = None
    if river_points:
        river_mask = build_river_mask(river_points, buffer_m=cfg.river_buffer_m)

    tracks = sorted(tracks, key=lambda t: t.mmsi)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(
                pool.map(
                    lambda t: _process_track(t, cfg, coast_index, harbor_index, river_mask),
                    tracks,
                )
            )
    else:
        results = [_process_track(t, cfg, coast_index, harbor_index, river_mask) for t in tracks]

    counters: dict[str, int] = {"tracks": len(tracks), "records": sum(len(t.records) for t in tracks)}
    entries: list[dict] = []
    for track_entries, track_counters in results:  # mmsi-ordered merge
        entries.extend(track_entries)
        for k, v in track_counters.items():
            counters[k] = counters.get(k, 0) + v
    if not entries:
        raise EmptyDataset("no sequences survived segmentation and filtering")

    if cfg.norm_mode == "global":
        spec = NormalizationSpec(mode="global", bounds=positional_bounds([e["matrix"] for e in entries]))
    else:
        spec = NormalizationSpec(mode="local", bounds={})

    counters["constant_channels"] = 0
    sequences: list[FeatureSequence] = []
    for e in entries:
        norm, flags = normalize(e["matrix"], spec)
        counters["constant_channels"] += len(flags)
        sequences.append(
            FeatureSequence(
                values=pad_to_length(norm, cfg.seq_len),
                true_length=e["true_length"],
                label=e["label"],
                mmsi=e["mmsi"],
                source_id=e["source_id"],
                transform_tag=cfg.transform,
            )
        )

    rng = np.random.default_rng(cfg.seed)
    assignment = _assign_splits([{"mmsi": s.mmsi} for s in sequences], cfg, rng)
    shuffle = rng.permutation(len(sequences))

    split_files = {}
    for name in SPLIT_NAMES:
        members = [sequences[i] for i in shuffle if assignment[i] == name]
        path = out_dir / f"{name}.shard"
        write_shard(members, path)
        split_files[name] = {"file": path.name, "count": len(members), "sha256": _sha256(path)}

    class_counts = {name: 0 for name in CLASS_NAMES}
    for s in sequences:
        class_counts[CLASS_NAMES[int(s.label)]] += 1
    counters["sequences"] = len(sequences)

    manifest = {
        "format": "aisq-dataset",
        "version": 1,
        "seq_len": cfg.seq_len,
        "transform": cfg.transform,
        "channels": list(FEATURE_CHANNELS),
        "norm_mode": cfg.norm_mode,
        "norm_bounds": {
            **{k: list(v) for k, v in FIXED_BOUNDS.items()},
            **{k: list(v) for k, v in spec.bounds.items()},
        },
        "thresholds": {
            "time_gap_s": cfg.time_gap_s,
            "dist_sq_deg": cfg.dist_sq_deg,
            "stationary_deg_per_sample": cfg.stationary_threshold,
            "river_fraction": cfg.river_fraction,
            "river_buffer_m": cfg.river_buffer_m if river_mask is not None else None,
            "min_chunk_fraction": cfg.min_chunk_fraction,
        },
        "geo": {
            "coast_cell_km": cfg.coast_cell_km,
            "coast_points": coast_index.point_count,
            "harbor_cell_km": cfg.harbor_cell_km,
            "harbor_points": harbor_index.point_count,
            "river_points": river_mask.index.point_count if river_mask is not None else None,
        },
        "seed": cfg.seed,
        "split_mode": cfg.split_mode,
        "splits": split_files,
        "class_counts": class_counts,
        "counters": counters,
        "assignments": [
            {
                "id": s.source_id,
                "mmsi": s.mmsi,
                "label": CLASS_NAMES[int(s.label)],
                "split": assignment[i],
            }
            for i, s in enumerate(sequences)
        ],
    }
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(dataset_dir: str | Path) -> dict:
    with open(Path(dataset_dir) / MANIFEST_NAME) as fh:
        return json.load(fh)


def load_split(dataset_dir: str | Path, split: str) -> list[FeatureSequence]:
    """Read one split's sequences, stamped with the manifest's transform tag."""
    manifest = load_manifest(dataset_dir)
    if split not in manifest["splits"]:
        raise KeyError(f"unknown split {split!r}")
    path = Path(dataset_dir) / manifest["splits"][split]["file"]
    return read_shard(path, transform_tag=manifest["transform"])


def split_arrays(sequences: list[FeatureSequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack sequences into (X, y, true_lengths) with X as (N, channels, L)."""
    if not sequences:
        raise EmptyDataset("empty split")
    x = np.stack([s.values for s in sequences]).transpose(0, 2, 1).astype(np.float32)
    y = np.array([int(s.label) for s in sequences], dtype=np.int64)
    tl = np.array([s.true_length for s in sequences], dtype=np.int64)
    return x, y, tl
