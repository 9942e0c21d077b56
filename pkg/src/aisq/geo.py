"""Reference geometry (coastline, harbors, rivers) and bounded nearest-distance queries.

A `GeoGridIndex` tiles the globe with fixed-degree cells sized for the
equator and answers "distance to the nearest indexed point, capped at half
the cell size" queries. The cap is the contract: a 40 km coastline grid
answers up to 20 km, a 5000 km harbor grid up to 2500 km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.0
KM_PER_DEG = 111.32  # km per degree of longitude at the equator; grid sizing only

# Above this latitude the equirectangular tiling degenerates; fall back to a
# full scan (reference sets are small enough for this to stay cheap).
POLAR_FALLBACK_LAT = 85.0


class EmptyPointSet(ValueError):
    """Attempt to build an index with no points."""


class FormatError(ValueError):
    """Point-list file row outside the documented format."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise FormatError(f"lat {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise FormatError(f"lon {self.lon} outside [-180, 180]")


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km (mean Earth radius 6371.0 km).

    Uses atan2 with an expansion of 1-haversine into a sum of non-negative
    terms, so near-antipodal distances keep full precision.
    """
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    cc = math.cos(phi1) * math.cos(phi2)
    h = math.sin(dphi / 2.0) ** 2 + cc * math.sin(dlam / 2.0) ** 2
    # identity: 1 - h == sin^2((phi1+phi2)/2) + cos(phi1)cos(phi2)cos^2(dlam/2)
    g = math.sin((phi1 + phi2) / 2.0) ** 2 + cc * math.cos(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(g))


@dataclass(frozen=True)
class GeoGridIndex:
    """Immutable uniform grid over a point set for capped nearest-distance queries."""

    cell_size_km: float
    query_radius_km: float
    cell_deg: float
    buckets: dict
    point_count: int
    _lats: np.ndarray = field(repr=False)
    _lons: np.ndarray = field(repr=False)

    def min_distance_km(self, p: GeoPoint) -> float:
        return min_distance_within(self, p)


def build_index(points: list[GeoPoint], cell_size_km: float) -> GeoGridIndex:
    """Bucket points into an equirectangular grid of `cell_size_km` cells.

    Cell edges are `cell_size_km / 111.32` degrees, i.e. sized for the
    equator; the queryable radius is exactly half the cell size.
    """
    if cell_size_km <= 0:
        raise ValueError(f"cell_size_km must be positive, got {cell_size_km}")
    if not points:
        raise EmptyPointSet("no points to index")
    cell_deg = cell_size_km / KM_PER_DEG
    staging: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for p in points:
        key = (math.floor(p.lat / cell_deg), math.floor(p.lon / cell_deg))
        staging.setdefault(key, []).append((p.lat, p.lon))
    buckets = {
        key: (np.array([t[0] for t in pts]), np.array([t[1] for t in pts]))
        for key, pts in staging.items()
    }
    return GeoGridIndex(
        cell_size_km=cell_size_km,
        query_radius_km=cell_size_km / 2.0,
        cell_deg=cell_deg,
        buckets=buckets,
        point_count=len(points),
        _lats=np.array([p.lat for p in points]),
        _lons=np.array([p.lon for p in points]),
    )


def _candidate_columns(index: GeoGridIndex, lat_extreme: float, lon_lo: float, lon_hi: float):
    """Column indices covering the radius disc for any query in the group.

    Returns None when the disc geometry forces a full scan (polar band, disc
    reaching the pole, or a span wrapping most of the globe). The column span
    is widened by 1/cos(latitude) so coverage stays exact at high latitudes.
    """
    r = index.query_radius_km
    if lat_extreme > POLAR_FALLBACK_LAT:
        return None
    rho = r / EARTH_RADIUS_KM  # angular radius
    if lat_extreme + math.degrees(rho) >= 89.999:
        return None  # disc reaches the pole: all longitudes are in range
    sin_ratio = math.sin(rho) / math.cos(math.radians(lat_extreme))
    if sin_ratio >= 1.0:
        return None
    # max longitude deviation of the radius disc, plus float safety margin
    w_deg = math.degrees(math.asin(sin_ratio)) * (1.0 + 1e-9) + 1e-12
    d = index.cell_deg
    jmin = math.floor((lon_lo - w_deg) / d)
    jmax = math.floor((lon_hi + w_deg) / d)
    if (jmax - jmin + 1) * d >= 360.0:
        return None
    cols = set()
    for j in range(jmin, jmax + 1):
        lon_center = (j + 0.5) * d
        wrapped = ((lon_center + 180.0) % 360.0) - 180.0
        cols.add(math.floor(wrapped / d))
    return cols


def _gather(index: GeoGridIndex, rows, cols) -> tuple[np.ndarray, np.ndarray] | None:
    lats, lons = [], []
    for i in rows:
        for j in cols:
            arrs = index.buckets.get((i, j))
            if arrs is not None:
                lats.append(arrs[0])
                lons.append(arrs[1])
    if not lats:
        return None
    return np.concatenate(lats), np.concatenate(lons)


def min_distances_within(index: GeoGridIndex, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorized capped min-distance for many query points.

    Queries are grouped by grid cell; each group scans the adjacent rows and
    a column span wide enough to cover the radius disc at the group's worst
    latitude (a superset of each point's own disc, so results are identical
    to per-point brute force capped at the query radius).
    """
    lats = np.asarray(lats, dtype=np.float64)
    lons = np.asarray(lons, dtype=np.float64)
    r = index.query_radius_km
    out = np.full(len(lats), r)
    d = index.cell_deg
    cell_i = np.floor(lats / d).astype(np.int64)
    cell_j = np.floor(lons / d).astype(np.int64)
    groups: dict[tuple[int, int], list[int]] = {}
    for k in range(len(lats)):
        groups.setdefault((int(cell_i[k]), int(cell_j[k])), []).append(k)
    for (i0, _), members in groups.items():
        idx = np.array(members)
        glats, glons = lats[idx], lons[idx]
        lat_extreme = float(np.abs(glats).max())
        cols = _candidate_columns(index, lat_extreme, float(glons.min()), float(glons.max()))
        if cols is None:
            cand = (index._lats, index._lons)
        else:
            cand = _gather(index, (i0 - 1, i0, i0 + 1), cols)
            if cand is None:
                continue  # nothing in range: stays at the cap
        dist = _haversine_pairwise(glats, glons, cand[0], cand[1]).min(axis=1)
        out[idx] = np.minimum(dist, r)
    return out


def _haversine_pairwise(
    lats1: np.ndarray, lons1: np.ndarray, lats2: np.ndarray, lons2: np.ndarray
) -> np.ndarray:
    phi1 = np.radians(lats1)[:, None]
    phi2 = np.radians(lats2)[None, :]
    dphi = phi2 - phi1
    dlam = np.radians(lons2)[None, :] - np.radians(lons1)[:, None]
    cc = np.cos(phi1) * np.cos(phi2)
    h = np.sin(dphi / 2.0) ** 2 + cc * np.sin(dlam / 2.0) ** 2
    g = np.sin((phi1 + phi2) / 2.0) ** 2 + cc * np.cos(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arctan2(np.sqrt(h), np.sqrt(np.maximum(g, 0.0)))


def min_distance_within(index: GeoGridIndex, p: GeoPoint) -> float:
    """Minimum distance from `p` to any indexed point, capped at the query radius.

    Equals a brute-force search over all indexed points capped at the same
    radius; returns exactly the radius when nothing lies within it.
    """
    return float(min_distances_within(index, np.array([p.lat]), np.array([p.lon]))[0])


@dataclass(frozen=True)
class RiverMask:
    """Grid over river polyline vertices with a proximity buffer in meters."""

    index: GeoGridIndex
    buffer_m: float

    def __post_init__(self):
        if self.buffer_m <= 0:
            raise ValueError(f"buffer_m must be positive, got {self.buffer_m}")
        if self.buffer_m / 1000.0 > self.index.query_radius_km:
            raise ValueError(
                f"buffer {self.buffer_m} m exceeds the index query radius "
                f"{self.index.query_radius_km} km"
            )


def build_river_mask(
    points: list[GeoPoint], buffer_m: float = 200.0, cell_size_km: float = 10.0
) -> RiverMask:
    return RiverMask(index=build_index(points, cell_size_km), buffer_m=buffer_m)


def near_river(mask: RiverMask, p: GeoPoint) -> bool:
    """True iff the nearest river vertex is at most `buffer_m` away."""
    return min_distance_within(mask.index, p) * 1000.0 <= mask.buffer_m


def load_point_list(path: str | Path, max_points: int | None = None) -> list[GeoPoint]:
    """Read a `lat,lon[,name]` CSV point list; '#' starts a comment line.

    With `max_points`, vertices are uniformly subsampled by index stride
    (first and last retained).
    """
    points: list[GeoPoint] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise FormatError(f"{path}:{lineno}: expected 'lat,lon[,name]'")
            try:
                lat = float(parts[0])
                lon = float(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric coordinates") from None
            try:
                points.append(GeoPoint(lat=lat, lon=lon))
            except FormatError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
    if max_points is not None and len(points) > max_points:
        idx = np.linspace(0, len(points) - 1, max_points).astype(int)
        points = [points[i] for i in idx]
    return points


def load_coastline(path: str | Path, max_points: int | None = None) -> list[GeoPoint]:
    """Coastline polyline vertices flattened into a point set."""
    return load_point_list(path, max_points=max_points)


def load_harbors(path: str | Path) -> list[GeoPoint]:
    """Harbor positions; duplicates are kept (idempotent for min-distance)."""
    return load_point_list(path)
