"""Feature computation and min-max normalization for fixed-length sequences.

Each sequence is an L x 9 matrix with the channel order below. Positions are
shifted so the trajectory starts at the origin ("relative-to-first"); for
rotate-to-zero datasets, a second pair of channels holds the same positions
rotated so the end point lands on the positive x axis. In relative-to-first
builds the rotation channels simply duplicate the shifted ones, keeping the
channel count (and downstream input sizes) identical across both families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geo import GeoGridIndex, min_distances_within
from .segmentation import Chunk, ClassLabel, TIME_GAP_S

FEATURE_CHANNELS = (
    "dt",
    "sog",
    "cog",
    "x_rtf",
    "y_rtf",
    "x_rtz",
    "y_rtz",
    "d_coast",
    "d_harbor",
)

POSITIONAL_CHANNELS = ("x_rtf", "y_rtf", "x_rtz", "y_rtz")

# Fixed normalization bounds: time gaps are bounded by the segmentation
# threshold, sog/cog by their encoding ranges, distances by the query caps.
FIXED_BOUNDS = {
    "dt": (0.0, TIME_GAP_S),
    "sog": (0.0, 1022.0),
    "cog": (0.0, 359.9),
    "d_coast": (0.0, 20.0),
    "d_harbor": (0.0, 2500.0),
}

TRANSFORM_TAGS = ("rtf", "rtz")


class ConstantChannel(ValueError):
    """Positional channel with zero range (flagged, never raised by normalize)."""


@dataclass(frozen=True)
class FeatureSequence:
    """Normalized L x 9 feature matrix with label and provenance."""

    values: np.ndarray  # (L, 9) float32, rows beyond true_length exactly zero
    true_length: int
    label: ClassLabel
    mmsi: int
    source_id: str
    transform_tag: str


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-channel (min, max) bounds and the positional normalization mode."""

    mode: str  # "global" | "local"
    bounds: dict  # channel name -> (min, max); positional entries only in global mode

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not hi > lo:
                raise ValueError(f"channel {name!r}: max {hi} must exceed min {lo}")


def transform_relative_to_first(lats: np.ndarray, lons: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shift so the trajectory starts at the origin: x = lon - lon0, y = lat - lat0."""
    if len(lats) == 0:
        raise ValueError("empty chunk")
    return lons - lons[0], lats - lats[0]


def transform_rotate_to_zero(
    x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Rotate origin-anchored positions so the end point lies on the +x axis.

    Returns (x', y', degenerate). A trajectory ending back at the origin has
    no defined rotation; it passes through unchanged with the flag set.
    """
    xe, ye = x[-1], y[-1]
    if xe == 0.0 and ye == 0.0:
        return x, y, True
    theta = -math.atan2(ye, xe)
    c, s = math.cos(theta), math.sin(theta)
    return x * c - y * s, x * s + y * c, False


def compute_features(
    chunk: Chunk,
    coast_index: GeoGridIndex,
    harbor_index: GeoGridIndex,
    transform_tag: str,
) -> tuple[np.ndarray, bool]:
    """Raw (unnormalized) true_length x 9 feature matrix for one chunk.

    Returns (matrix, degenerate_endpoint). Distances are already capped by
    the index query radii (20 km coast, 2500 km harbor).
    """
    if transform_tag not in TRANSFORM_TAGS:
        raise ValueError(f"unknown transform tag {transform_tag!r}")
    n = chunk.true_length
    m = np.zeros((n, len(FEATURE_CHANNELS)), dtype=np.float64)
    m[1:, 0] = np.diff(chunk.times)
    m[:, 1] = chunk.sogs
    m[:, 2] = chunk.cogs
    x, y = transform_relative_to_first(chunk.lats, chunk.lons)
    m[:, 3] = x
    m[:, 4] = y
    degenerate = False
    if transform_tag == "rtz":
        xr, yr, degenerate = transform_rotate_to_zero(x, y)
        m[:, 5] = xr
        m[:, 6] = yr
    else:
        m[:, 5] = x
        m[:, 6] = y
    m[:, 7] = min_distances_within(coast_index, chunk.lats, chunk.lons)
    m[:, 8] = min_distances_within(harbor_index, chunk.lats, chunk.lons)
    return m, degenerate


def positional_bounds(matrices: list[np.ndarray]) -> dict:
    """Global per-channel (min, max) of the positional channels over a build."""
    bounds = {}
    for name in POSITIONAL_CHANNELS:
        c = FEATURE_CHANNELS.index(name)
        lo = min(float(m[:, c].min()) for m in matrices)
        hi = max(float(m[:, c].max()) for m in matrices)
        bounds[name] = (lo, hi)
    return bounds


def normalize(matrix: np.ndarray, spec: NormalizationSpec) -> tuple[np.ndarray, list[str]]:
    """Min-max scale every channel into [0, 1], clamping at the bounds.

    Positional channels use the spec bounds in global mode, the matrix's own
    per-channel min/max in local mode. A zero-range channel is set to 0 and
    reported in the returned flag list instead of raising.
    """
    out = np.empty_like(matrix)
    flags: list[str] = []
    for c, name in enumerate(FEATURE_CHANNELS):
        col = matrix[:, c]
        if name in FIXED_BOUNDS:
            lo, hi = FIXED_BOUNDS[name]
        elif spec.mode == "global":
            lo, hi = spec.bounds[name]
        else:
            lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            out[:, c] = 0.0
            flags.append(name)
            continue
        out[:, c] = np.clip((col - lo) / (hi - lo), 0.0, 1.0)
    return out, flags


def denormalize(values: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """Inverse of `normalize` for global-mode specs (local bounds are not stored)."""
    if spec.mode != "global":
        raise ValueError("denormalize requires global-mode bounds")
    out = np.empty_like(values, dtype=np.float64)
    for c, name in enumerate(FEATURE_CHANNELS):
        lo, hi = FIXED_BOUNDS.get(name, spec.bounds.get(name, (0.0, 1.0)))
        out[:, c] = values[:, c] * (hi - lo) + lo
    return out


def pad_to_length(matrix: np.ndarray, seq_len: int) -> np.ndarray:
    """Zero-pad normalized rows out to the target length, as float32."""
    n, k = matrix.shape
    if n > seq_len:
        raise ValueError(f"matrix has {n} rows, target is {seq_len}")
    out = np.zeros((seq_len, k), dtype=np.float32)
    out[:n] = matrix
    return out
