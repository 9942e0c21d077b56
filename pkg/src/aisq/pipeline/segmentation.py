"""Track segmentation, fixed-length chunking, movement filters, and class mapping.

Tracks are split wherever the time gap exceeds 2 hours or the squared
euclidean move in degrees exceeds 1e-4 (plain degrees, not great-circle:
cheap and adequate at these thresholds). Segments are then cut into windows
of the target sequence length; a leftover shorter than 80% of the target is
discarded, anything longer is kept and later zero-padded.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..records import VesselTrack
from ..geo import RiverMask, min_distances_within

TIME_GAP_S = 7200.0
DIST_SQ_DEG = 1e-4
STATIONARY_THRESHOLD = 2e-5  # degrees per sample; roughly a vessel under ~1 kn at 10 s sampling
RIVER_FRACTION = 0.5
MIN_CHUNK_FRACTION = 0.8


class TooShort(ValueError):
    """Chunk has fewer than two samples."""


class UnmappedShipType(ValueError):
    """Ship type code outside the five evaluated classes."""


class ClassLabel(IntEnum):
    CARGO_TANKER = 0
    FISHING = 1
    PASSENGER = 2
    PLEASURE_CRAFT = 3
    TUG = 4


CLASS_NAMES = ("CargoTanker", "Fishing", "Passenger", "PleasureCraft", "Tug")


def map_class(shiptype_code: int | None) -> ClassLabel:
    """Map an AIS type-of-ship code onto the five evaluated classes.

    Cargo (70-79) and tanker (80-89) merge into one class; 30 fishing,
    60-69 passenger, 37 pleasure craft, 52 tug. Everything else is rejected.
    """
    if shiptype_code is None:
        raise UnmappedShipType("unknown ship type")
    if 70 <= shiptype_code <= 89:
        return ClassLabel.CARGO_TANKER
    if shiptype_code == 30:
        return ClassLabel.FISHING
    if 60 <= shiptype_code <= 69:
        return ClassLabel.PASSENGER
    if shiptype_code == 37:
        return ClassLabel.PLEASURE_CRAFT
    if shiptype_code == 52:
        return ClassLabel.TUG
    raise UnmappedShipType(f"code {shiptype_code}")


@dataclass(frozen=True)
class TrackSegment:
    """A gap-free stretch of one vessel's records, as parallel column arrays."""

    mmsi: int
    seg_id: int
    times: np.ndarray  # int64 epoch seconds
    lats: np.ndarray
    lons: np.ndarray
    sogs: np.ndarray  # tenths of knots
    cogs: np.ndarray  # degrees
    shiptype: int | None

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class Chunk:
    """True (unpadded) samples of one fixed-length window."""

    mmsi: int
    source_id: str
    times: np.ndarray
    lats: np.ndarray
    lons: np.ndarray
    sogs: np.ndarray
    cogs: np.ndarray
    target_len: int
    shiptype: int | None

    @property
    def true_length(self) -> int:
        return len(self.times)


def segment(
    track: VesselTrack,
    time_gap_s: float = TIME_GAP_S,
    dist_sq_deg: float = DIST_SQ_DEG,
) -> list[TrackSegment]:
    """Split a time-sorted track at time or distance gaps; no samples are dropped."""
    n = len(track.records)
    if n == 0:
        return []
    times = np.array([r.timestamp for r in track.records], dtype=np.int64)
    lats = np.array([r.lat for r in track.records])
    lons = np.array([r.lon for r in track.records])
    sogs = np.array([r.sog for r in track.records], dtype=np.int64)
    cogs = np.array([r.cog for r in track.records])

    dt = np.diff(times)
    dsq = np.diff(lats) ** 2 + np.diff(lons) ** 2
    breaks = np.flatnonzero((dt > time_gap_s) | (dsq > dist_sq_deg)) + 1
    bounds = [0, *breaks.tolist(), n]
    segments = []
    for k in range(len(bounds) - 1):
        lo, hi = bounds[k], bounds[k + 1]
        segments.append(
            TrackSegment(
                mmsi=track.mmsi,
                seg_id=k,
                times=times[lo:hi],
                lats=lats[lo:hi],
                lons=lons[lo:hi],
                sogs=sogs[lo:hi],
                cogs=cogs[lo:hi],
                shiptype=track.shiptype,
            )
        )
    return segments


def chunk(
    seg: TrackSegment, seq_len: int, min_fraction: float = MIN_CHUNK_FRACTION
) -> list[Chunk]:
    """Cut a segment into consecutive windows of exactly `seq_len` samples.

    The final leftover is kept (for later zero-padding) iff its length is at
    least `min_fraction * seq_len`, otherwise it is discarded.
    """
    n = len(seg)
    out = []
    pos = 0
    idx = 0
    while pos + seq_len <= n:
        out.append(_slice_chunk(seg, pos, pos + seq_len, seq_len, idx))
        pos += seq_len
        idx += 1
    leftover = n - pos
    if leftover > 0 and leftover >= min_fraction * seq_len:
        out.append(_slice_chunk(seg, pos, n, seq_len, idx))
    return out


def _slice_chunk(seg: TrackSegment, lo: int, hi: int, seq_len: int, idx: int) -> Chunk:
    return Chunk(
        mmsi=seg.mmsi,
        source_id=f"{seg.mmsi}/s{seg.seg_id}/c{idx}",
        times=seg.times[lo:hi],
        lats=seg.lats[lo:hi],
        lons=seg.lons[lo:hi],
        sogs=seg.sogs[lo:hi],
        cogs=seg.cogs[lo:hi],
        target_len=seq_len,
        shiptype=seg.shiptype,
    )


def stationary_measure(chunk: Chunk) -> float:
    """Mean consecutive-point displacement in euclidean degrees per sample.

    Sum of the n-1 consecutive displacements divided by the sample count n;
    padding never enters (chunks hold true samples only).
    """
    n = chunk.true_length
    if n < 2:
        raise TooShort(f"{n} samples")
    steps = np.hypot(np.diff(chunk.lats), np.diff(chunk.lons))
    return float(steps.sum() / n)


def is_stationary(chunk: Chunk, threshold: float = STATIONARY_THRESHOLD) -> bool:
    """True iff the movement measure falls strictly below the threshold."""
    return stationary_measure(chunk) < threshold


def filter_stationary(chunks: list[Chunk], threshold: float = STATIONARY_THRESHOLD) -> list[Chunk]:
    return [c for c in chunks if not is_stationary(c, threshold)]


def river_fraction(chunk: Chunk, mask: RiverMask) -> float:
    dist_km = min_distances_within(mask.index, chunk.lats, chunk.lons)
    hits = int((dist_km * 1000.0 <= mask.buffer_m).sum())
    return hits / chunk.true_length


def on_river(chunk: Chunk, mask: RiverMask, fraction: float = RIVER_FRACTION) -> bool:
    """True iff strictly more than `fraction` of the true samples lie on a river."""
    return river_fraction(chunk, mask) > fraction


def filter_river(
    chunks: list[Chunk], mask: RiverMask, fraction: float = RIVER_FRACTION
) -> list[Chunk]:
    return [c for c in chunks if not on_river(c, mask, fraction)]
