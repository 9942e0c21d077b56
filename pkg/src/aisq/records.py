"""Validated AIS position records, CSV interchange, and per-vessel grouping.

The CSV format is the canonical input for the pipeline; the AIVDM decoder in
`aisq.nmea` is an optional front-end that produces it. Schema (header
required, exact names): ``mmsi,timestamp,lat,lon,sog,cog,shiptype`` with
timestamp as integer epoch seconds, sog as integer tenths of knots, cog as
decimal degrees, shiptype as integer or empty.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

CSV_HEADER = ["mmsi", "timestamp", "lat", "lon", "sog", "cog", "shiptype"]

MMSI_MAX = (1 << 30) - 1
SOG_MAX = 1022  # tenths of knots; 1023 is the 'unavailable' sentinel


class InvalidRecord(ValueError):
    """Field outside the valid range for a position record."""


class HeaderMismatch(ValueError):
    """CSV header does not match the documented schema."""


@dataclass(frozen=True)
class AisRecord:
    """One decoded position sample. Sentinel values are never stored."""

    mmsi: int
    timestamp: int  # seconds since Unix epoch (UTC)
    lat: float
    lon: float
    sog: int  # tenths of knots, 0..1022
    cog: float  # degrees, 0 <= cog < 360
    shiptype: int | None = None  # AIS type-of-ship code 0..99, or None

    def __post_init__(self):
        if not (0 <= self.mmsi <= MMSI_MAX):
            raise InvalidRecord(f"mmsi {self.mmsi} outside 30-bit range")
        if not (-90.0 <= self.lat <= 90.0):
            raise InvalidRecord(f"lat {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise InvalidRecord(f"lon {self.lon} outside [-180, 180]")
        if not (0 <= self.sog <= SOG_MAX):
            raise InvalidRecord(f"sog {self.sog} outside [0, {SOG_MAX}]")
        if not (0.0 <= self.cog < 360.0):
            raise InvalidRecord(f"cog {self.cog} outside [0, 360)")
        if self.shiptype is not None and not (0 <= self.shiptype <= 99):
            raise InvalidRecord(f"shiptype {self.shiptype} outside [0, 99]")


@dataclass(frozen=True)
class VesselTrack:
    """Time-sorted records of one MMSI with its resolved ship type."""

    mmsi: int
    records: tuple[AisRecord, ...]
    shiptype: int | None


def read_records_csv(path: str | Path, counters: dict | None = None) -> Iterator[AisRecord]:
    """Stream records from a CSV file, skipping (and counting) invalid rows."""
    if counters is None:
        counters = {}
    counters.setdefault("rows_skipped", 0)
    counters.setdefault("rows_read", 0)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch("empty file, header required") from None
        if header != CSV_HEADER:
            raise HeaderMismatch(f"expected {CSV_HEADER}, got {header}")
        for row in reader:
            if not row:
                continue
            try:
                rec = AisRecord(
                    mmsi=int(row[0]),
                    timestamp=int(row[1]),
                    lat=float(row[2]),
                    lon=float(row[3]),
                    sog=int(row[4]),
                    cog=float(row[5]),
                    shiptype=int(row[6]) if len(row) > 6 and row[6] != "" else None,
                )
            except (InvalidRecord, ValueError, IndexError):
                counters["rows_skipped"] += 1
                continue
            counters["rows_read"] += 1
            yield rec


def write_records_csv(records: Iterable[AisRecord], path: str | Path) -> int:
    """Write records in the canonical CSV schema; returns the row count."""
    n = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.mmsi,
                    r.timestamp,
                    repr(r.lat),
                    repr(r.lon),
                    r.sog,
                    repr(r.cog),
                    "" if r.shiptype is None else r.shiptype,
                ]
            )
            n += 1
    return n


def resolve_shiptype(records: Iterable[AisRecord]) -> int | None:
    """Most frequent non-unknown code; ties broken by the latest report."""
    counts: Counter[int] = Counter()
    last_seen: dict[int, int] = {}
    for r in records:
        if r.shiptype is None:
            continue
        counts[r.shiptype] += 1
        ts = last_seen.get(r.shiptype)
        if ts is None or r.timestamp > ts:
            last_seen[r.shiptype] = r.timestamp
    if not counts:
        return None
    return max(counts, key=lambda c: (counts[c], last_seen[c]))


def group_tracks(records: Iterable[AisRecord]) -> list[VesselTrack]:
    """Partition records by MMSI into time-sorted tracks.

    Exact-duplicate timestamps keep the first occurrence, so output
    timestamps strictly increase within each track. Tracks are returned in
    ascending MMSI order.
    """
    by_mmsi: dict[int, list[AisRecord]] = defaultdict(list)
    for r in records:
        by_mmsi[r.mmsi].append(r)
    tracks = []
    for mmsi in sorted(by_mmsi):
        recs = sorted(by_mmsi[mmsi], key=lambda r: r.timestamp)
        deduped: list[AisRecord] = []
        for r in recs:
            if deduped and r.timestamp == deduped[-1].timestamp:
                continue
            deduped.append(r)
        tracks.append(
            VesselTrack(mmsi=mmsi, records=tuple(deduped), shiptype=resolve_shiptype(deduped))
        )
    return tracks
