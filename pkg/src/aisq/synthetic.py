"""Synthetic vessels and reference geometry for tests, demos, and benchmarks.

Three behavior archetypes are generated: straight-fast transits, zigzag-slow
runs (fishing-like), and loitering with slow drift. Every vessel carries
heavy per-sequence nuisance randomness (heading, sampling interval, speed
jitter, phase, track length), so class identity lives mostly in the temporal
pattern rather than in any single summary statistic.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .geo import GeoPoint
from .records import AisRecord, VesselTrack

KM_PER_DEG_LAT = 111.32
KN_TO_KM_S = 1.852 / 3600.0

# behavior -> AIS type-of-ship code (cargo, fishing, pleasure craft)
CLASS_SHIPTYPE = {"straight": 70, "zigzag": 30, "loiter": 37}
BEHAVIORS = tuple(CLASS_SHIPTYPE)


def _dead_reckon(lat: float, lon: float, heading_deg: float, dist_km: float) -> tuple[float, float]:
    h = math.radians(heading_deg)
    dlat = dist_km * math.cos(h) / KM_PER_DEG_LAT
    dlon = dist_km * math.sin(h) / (KM_PER_DEG_LAT * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


def synthetic_vessel(kind: str, mmsi: int, rng: np.random.Generator) -> VesselTrack:
    """One vessel track of 290..360 samples with class-typical kinematics."""
    if kind not in BEHAVIORS:
        raise ValueError(f"unknown behavior {kind!r}")
    n = int(rng.integers(290, 361))
    dt_base = float(rng.uniform(10.0, 30.0))
    lat = float(rng.uniform(-50.0, 55.0))
    lon = float(rng.uniform(-150.0, 150.0))
    base_heading = float(rng.uniform(0.0, 360.0))
    t = int(rng.integers(1_500_000_000, 1_600_000_000))

    if kind == "straight":
        speed = float(rng.uniform(8.0, 25.0))
    elif kind == "zigzag":
        speed = float(rng.uniform(3.0, 12.0))
        amplitude = float(rng.uniform(50.0, 130.0))
        period = float(rng.uniform(10.0, 36.0))
        phase = float(rng.uniform(0.0, period))
    else:
        speed = float(rng.uniform(3.0, 10.0))
        heading = base_heading
        drift_dir = float(rng.uniform(0.0, 360.0))
        drift_kn = float(rng.uniform(0.5, min(3.0, 0.6 * speed)))

    records = []
    for i in range(n):
        if kind == "straight":
            heading = base_heading + float(rng.normal(0.0, 0.8))
            v = speed * float(rng.uniform(0.97, 1.03))
        elif kind == "zigzag":
            swing = amplitude * math.sin(2.0 * math.pi * (i + phase) / period)
            heading = base_heading + swing + float(rng.normal(0.0, 1.5))
            # fishing-like: slower through the turns
            v = speed * (0.8 + 0.2 * abs(math.cos(2.0 * math.pi * (i + phase) / period)))
            v *= float(rng.uniform(0.95, 1.05))
        else:
            heading = heading + float(rng.uniform(-100.0, 100.0))
            v = speed * float(rng.uniform(0.8, 1.2))
        dt = max(2, int(round(dt_base * float(rng.uniform(0.6, 1.4)))))
        t += dt
        if kind == "loiter":
            # milling on top of a slow current: over-ground motion is the sum
            hv = math.radians(heading)
            hd = math.radians(drift_dir)
            north = v * math.cos(hv) + drift_kn * math.cos(hd)
            east = v * math.sin(hv) + drift_kn * math.sin(hd)
            v = math.hypot(north, east)
            heading = math.degrees(math.atan2(east, north))
        step_km = v * KN_TO_KM_S * dt
        lat, lon = _dead_reckon(lat, lon, heading, step_km)
        records.append(
            AisRecord(
                mmsi=mmsi,
                timestamp=t,
                lat=lat,
                lon=lon,
                sog=int(np.clip(round(v * 10.0), 0, 1022)),
                cog=float(heading % 360.0),
                shiptype=CLASS_SHIPTYPE[kind],
            )
        )
    return VesselTrack(mmsi=mmsi, records=tuple(records), shiptype=CLASS_SHIPTYPE[kind])


def synthetic_fleet(counts: dict[str, int], seed: int = 0) -> list[VesselTrack]:
    """Deterministic fleet with the given number of vessels per behavior."""
    rng = np.random.default_rng(seed)
    tracks = []
    mmsi = 200_000_000
    for kind in BEHAVIORS:
        for _ in range(counts.get(kind, 0)):
            tracks.append(synthetic_vessel(kind, mmsi, rng))
            mmsi += 1
    return tracks


def synthetic_geo(seed: int = 7) -> tuple[list[GeoPoint], list[GeoPoint]]:
    """Deterministic reference geometry: an island lattice and 140 harbors."""
    rng = np.random.default_rng(seed)
    coast = []
    for lat in range(-60, 61, 12):
        for lon in range(-165, 166, 15):
            coast.append(
                GeoPoint(
                    lat=float(np.clip(lat + rng.uniform(-3, 3), -89.0, 89.0)),
                    lon=float(lon + rng.uniform(-4, 4)),
                )
            )
    harbors = [
        GeoPoint(lat=float(rng.uniform(-65.0, 65.0)), lon=float(rng.uniform(-179.0, 179.0)))
        for _ in range(140)
    ]
    return coast, harbors


def write_point_csv(points: list[GeoPoint], path: str | Path, comment: str = "") -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for p in points:
            fh.write(f"{p.lat!r},{p.lon!r}\n")


def write_reference_files(out_dir: str | Path, seed: int = 7) -> dict[str, Path]:
    """Write coastline/harbors/rivers CSVs for demos and CLI runs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coast, harbors = synthetic_geo(seed)
    rng = np.random.default_rng(seed + 1)
    # a couple of synthetic river polylines
    rivers = []
    for lat0, lon0 in ((47.0, 8.0), (-12.0, -55.0)):
        lat, lon = lat0, lon0
        for _ in range(60):
            lat += float(rng.uniform(-0.02, 0.05))
            lon += float(rng.uniform(0.01, 0.06))
            rivers.append(GeoPoint(lat=lat, lon=lon))
    paths = {
        "coastline": out_dir / "coastline.csv",
        "harbors": out_dir / "harbors.csv",
        "rivers": out_dir / "rivers.csv",
    }
    write_point_csv(coast, paths["coastline"], "synthetic coastline vertices: lat,lon")
    write_point_csv(harbors, paths["harbors"], "synthetic harbors: lat,lon")
    write_point_csv(rivers, paths["rivers"], "synthetic river vertices: lat,lon")
    return paths
