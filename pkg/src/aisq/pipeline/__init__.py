"""Track-to-dataset pipeline: segmentation, filters, features, normalization, shards."""

from .segmentation import (
    ClassLabel,
    Chunk,
    TrackSegment,
    UnmappedShipType,
    chunk,
    map_class,
    segment,
    stationary_measure,
)
from .features import (
    FEATURE_CHANNELS,
    FeatureSequence,
    NormalizationSpec,
    compute_features,
    normalize,
    transform_relative_to_first,
    transform_rotate_to_zero,
)
from .shard import read_shard, write_shard
from .dataset import PipelineConfig, build_dataset, load_manifest, load_split

__all__ = [
    "ClassLabel",
    "Chunk",
    "TrackSegment",
    "UnmappedShipType",
    "chunk",
    "map_class",
    "segment",
    "stationary_measure",
    "FEATURE_CHANNELS",
    "FeatureSequence",
    "NormalizationSpec",
    "compute_features",
    "normalize",
    "transform_relative_to_first",
    "transform_rotate_to_zero",
    "read_shard",
    "write_shard",
    "PipelineConfig",
    "build_dataset",
    "load_manifest",
    "load_split",
]
