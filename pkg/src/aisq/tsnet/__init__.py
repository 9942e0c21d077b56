"""Small deterministic tensor/training engine for 1D residual networks and MLPs."""

from .layers import (
    BatchNorm,
    ChannelSplit,
    Conv1d,
    DegenerateBatch,
    Dense,
    Flatten,
    GlobalAvgPool,
    Param,
    ReLU,
    ResidualBlock,
    Sequential,
    ShapeMismatch,
    softmax,
    softmax_cross_entropy,
)
from .model import (
    BlockConfig,
    InvalidConfig,
    ModelConfig,
    Network,
    PRESET_NAMES,
    TARGET_PARAM_COUNTS,
    build_model,
    make_preset,
    parameter_count,
)
from .train import (
    Adam,
    DivergedLoss,
    EmptySplit,
    TrainConfig,
    add_input_noise,
    default_batch_size,
    default_learning_rate,
    evaluate,
    train,
)
from .checkpoint import (
    Checkpoint,
    ChecksumMismatch,
    MagicMismatch,
    VersionMismatch,
    load_checkpoint,
    predict,
    save_checkpoint,
)

__all__ = [
    "BatchNorm",
    "ChannelSplit",
    "Conv1d",
    "DegenerateBatch",
    "Dense",
    "Flatten",
    "GlobalAvgPool",
    "Param",
    "ReLU",
    "ResidualBlock",
    "Sequential",
    "ShapeMismatch",
    "softmax",
    "softmax_cross_entropy",
    "BlockConfig",
    "InvalidConfig",
    "ModelConfig",
    "Network",
    "PRESET_NAMES",
    "TARGET_PARAM_COUNTS",
    "build_model",
    "make_preset",
    "parameter_count",
    "Adam",
    "DivergedLoss",
    "EmptySplit",
    "TrainConfig",
    "add_input_noise",
    "default_batch_size",
    "default_learning_rate",
    "evaluate",
    "train",
    "Checkpoint",
    "ChecksumMismatch",
    "MagicMismatch",
    "VersionMismatch",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
]
