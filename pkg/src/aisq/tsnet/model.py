"""Declarative network configs, preset architectures, and the model builder.

The residual presets follow the established time-series ResNet recipe: blocks
of three same-padded convolutions (kernels 8/5/3) with an additive shortcut,
a projection (1x1 conv) wherever the channel count changes, global average
pooling, and a single dense softmax head. Filter counts per preset are scaled
to approximate the published reference sizes in TARGET_PARAM_COUNTS; the
exact internal layouts behind those sizes are not public, so the counts are
logged for comparison rather than asserted. The two MLP baselines are exact:
211,909 and 220,229 parameters at L=360 with 9 channels and 5 classes.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .layers import (
    BatchNorm,
    ChannelSplit,
    Conv1d,
    Dense,
    Flatten,
    GlobalAvgPool,
    Layer,
    Param,
    ReLU,
    ResidualBlock,
    Sequential,
    ShapeMismatch,
    iter_layers,
    softmax,
)

logger = logging.getLogger(__name__)


class InvalidConfig(ValueError):
    """Model configuration that cannot be assembled."""


@dataclass(frozen=True)
class BlockConfig:
    filters: int
    kernels: tuple[int, ...] = (8, 5, 3)
    batchnorm: bool = False
    activation: str = "relu"
    shortcut: str = "auto"  # auto | identity | projection


@dataclass(frozen=True)
class ModelConfig:
    seq_len: int
    in_channels: int = 9
    n_classes: int = 5
    kind: str = "resnet"  # resnet | mlp
    blocks: tuple[BlockConfig, ...] = ()
    mlp_hidden: tuple[int, ...] = ()
    split: str | None = None  # None | stem | total
    stem_filters: int = 16
    stem_blocks: int = 2
    preset: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = [asdict(b) for b in self.blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["blocks"] = tuple(
            BlockConfig(**{**b, "kernels": tuple(b["kernels"])}) for b in d.get("blocks", [])
        )
        d["mlp_hidden"] = tuple(d.get("mlp_hidden", ()))
        return cls(**d)


TARGET_PARAM_COUNTS = {
    # Reference sizes the presets are scaled to approximate (resnets) or
    # reproduce exactly (MLPs, at L=360 / 9 channels / 5 classes).
    "tiny_resnet": 29_125,
    "shallow_resnet": 440_837,
    "deep_resnet": 1_327_877,
    "stretched_deep_resnet": 3_280_645,
    "split_resnet": 390_701,
    "total_split_resnet": 364_461,
    "mlp_2x64": 211_909,
    "mlp_4x64": 220_229,
}

PRESET_NAMES = tuple(TARGET_PARAM_COUNTS)


def make_preset(
    name: str,
    seq_len: int,
    in_channels: int = 9,
    n_classes: int = 5,
    batchnorm: bool = False,
) -> ModelConfig:
    """Build the ModelConfig for a named preset.

    The batchnorm flag applies to the residual presets only; the MLP
    baselines are plain dense stacks so their parameter counts stay exact.
    """

    def blocks(filter_list):
        return tuple(BlockConfig(filters=f, batchnorm=batchnorm) for f in filter_list)

    common = dict(seq_len=seq_len, in_channels=in_channels, n_classes=n_classes, preset=name)
    if name == "tiny_resnet":
        return ModelConfig(kind="resnet", blocks=blocks([26, 26, 26]), **common)
    if name == "shallow_resnet":
        return ModelConfig(kind="resnet", blocks=blocks([40, 40, 80, 80, 80, 80]), **common)
    if name == "deep_resnet":
        return ModelConfig(kind="resnet", blocks=blocks([40] * 7 + [72] * 14), **common)
    if name == "stretched_deep_resnet":
        return ModelConfig(kind="resnet", blocks=blocks([64] * 7 + [112] * 14), **common)
    if name == "split_resnet":
        return ModelConfig(
            kind="resnet",
            split="stem",
            stem_filters=16,
            stem_blocks=2,
            blocks=blocks([64, 64, 64, 64]),
            **common,
        )
    if name == "total_split_resnet":
        return ModelConfig(
            kind="resnet",
            split="total",
            stem_filters=16,
            stem_blocks=2,
            blocks=blocks([32, 32]),
            **common,
        )
    if name == "mlp_2x64":
        return ModelConfig(kind="mlp", mlp_hidden=(64, 64), **common)
    if name == "mlp_4x64":
        return ModelConfig(kind="mlp", mlp_hidden=(64, 64, 64, 64), **common)
    raise InvalidConfig(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")


def _make_block(c_in: int, bc: BlockConfig, rng: np.random.Generator, dtype) -> ResidualBlock:
    if bc.activation != "relu":
        raise InvalidConfig(f"unsupported activation {bc.activation!r}")
    layers: list[Layer] = []
    c = c_in
    for i, k in enumerate(bc.kernels):
        layers.append(Conv1d(c, bc.filters, k, rng, dtype))
        c = bc.filters
        if bc.batchnorm:
            layers.append(BatchNorm(bc.filters, dtype=dtype))
        if i < len(bc.kernels) - 1:
            layers.append(ReLU())
    shortcut = None
    needs_projection = c_in != bc.filters
    if bc.shortcut == "identity" and needs_projection:
        raise InvalidConfig(f"identity shortcut with {c_in} -> {bc.filters} channels")
    if bc.shortcut == "projection" or (bc.shortcut == "auto" and needs_projection):
        proj: list[Layer] = [Conv1d(c_in, bc.filters, 1, rng, dtype)]
        if bc.batchnorm:
            proj.append(BatchNorm(bc.filters, dtype=dtype))
        shortcut = Sequential(proj)
    return ResidualBlock(Sequential(layers), shortcut)


def _block_stack(c_in: int, blocks, rng, dtype) -> tuple[Sequential, int]:
    layers = []
    c = c_in
    for bc in blocks:
        layers.append(_make_block(c, bc, rng, dtype))
        c = bc.filters
    return Sequential(layers), c


class Network:
    """A built model: the layer tree plus its originating config."""

    def __init__(self, config: ModelConfig, root: Layer):
        self.config = config
        self.root = root

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.config.in_channels or x.shape[2] != self.config.seq_len:
            raise ShapeMismatch(
                f"expected (N, {self.config.in_channels}, {self.config.seq_len}), got {x.shape}"
            )
        return self.root.forward(x, train)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        return self.root.backward(dlogits)

    def trainable(self) -> list[Param]:
        return [p for _, layer in iter_layers(self.root) for p in layer.trainable()]

    def zero_grad(self) -> None:
        for p in self.trainable():
            p.grad[...] = 0

    @property
    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.trainable())

    @property
    def depth(self) -> int:
        """Number of weighted layers (convolutions and dense layers)."""
        return sum(
            1 for _, layer in iter_layers(self.root) if isinstance(layer, (Conv1d, Dense))
        )

    def predict_proba(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        out = []
        for lo in range(0, len(x), batch_size):
            out.append(softmax(self.forward(x[lo : lo + batch_size], train=False)))
        return np.concatenate(out, axis=0)

    def state(self) -> dict[str, np.ndarray]:
        """Copies of every persisted array (weights and running statistics)."""
        out = {}
        for path, layer in iter_layers(self.root):
            for key, arr in layer.arrays().items():
                out[f"{path}.{key}" if path else key] = arr.copy()
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        own = {}
        for path, layer in iter_layers(self.root):
            for key in layer.arrays():
                own[f"{path}.{key}" if path else key] = (layer, key)
        if set(own) != set(state):
            raise InvalidConfig(
                f"state has {len(state)} arrays, model expects {len(own)}; key sets differ"
            )
        for name, (layer, key) in own.items():
            try:
                layer.set_array(key, state[name])
            except ShapeMismatch as e:
                raise InvalidConfig(f"{name}: {e}") from None


def build_model(config: ModelConfig, seed: int = 0, dtype=np.float32) -> Network:
    """Assemble a network with He-uniform init (deterministic per seed)."""
    rng = np.random.default_rng(seed)
    if config.kind == "mlp":
        dims = [config.in_channels * config.seq_len, *config.mlp_hidden]
        layers: list[Layer] = [Flatten()]
        for d_in, d_out in zip(dims, dims[1:]):
            layers.append(Dense(d_in, d_out, rng, dtype))
            layers.append(ReLU())
        layers.append(Dense(dims[-1], config.n_classes, rng, dtype))
        net = Network(config, Sequential(layers))
    elif config.kind == "resnet":
        if not config.blocks:
            raise InvalidConfig("resnet config needs at least one block")
        if config.split is None:
            trunk, c = _block_stack(config.in_channels, config.blocks, rng, dtype)
            root = Sequential([trunk, GlobalAvgPool(), Dense(c, config.n_classes, rng, dtype)])
        elif config.split == "stem":
            stem_cfg = [
                BlockConfig(filters=config.stem_filters, batchnorm=config.blocks[0].batchnorm)
            ] * config.stem_blocks
            branches = [
                _block_stack(1, stem_cfg, rng, dtype)[0] for _ in range(config.in_channels)
            ]
            trunk, c = _block_stack(
                config.in_channels * config.stem_filters, config.blocks, rng, dtype
            )
            root = Sequential(
                [ChannelSplit(branches), trunk, GlobalAvgPool(), Dense(c, config.n_classes, rng, dtype)]
            )
        elif config.split == "total":
            stem_cfg = [
                BlockConfig(filters=config.stem_filters, batchnorm=config.blocks[0].batchnorm)
            ] * config.stem_blocks
            branches = []
            for _ in range(config.in_channels):
                stem, c0 = _block_stack(1, stem_cfg, rng, dtype)
                trunk, c = _block_stack(c0, config.blocks, rng, dtype)
                branches.append(Sequential([stem, trunk, GlobalAvgPool()]))
            root = Sequential(
                [
                    ChannelSplit(branches),
                    Dense(config.in_channels * c, config.n_classes, rng, dtype),
                ]
            )
        else:
            raise InvalidConfig(f"unknown split mode {config.split!r}")
        net = Network(config, root)
    else:
        raise InvalidConfig(f"unknown model kind {config.kind!r}")

    if config.preset in TARGET_PARAM_COUNTS:
        target = TARGET_PARAM_COUNTS[config.preset]
        logger.info(
            "preset %s: %d parameters (reference %d, %+.1f%%)",
            config.preset,
            net.parameter_count,
            target,
            100.0 * (net.parameter_count - target) / target,
        )
    return net


def parameter_count(config: ModelConfig) -> int:
    """Exact count of trainable scalars (including batch-norm gamma/beta)."""
    return build_model(config, seed=0).parameter_count
