"""Layers with analytic forward/backward passes on plain numpy arrays.

Convolutions run as strided im2col views feeding matrix products, which keeps
the whole engine within numpy while staying fast enough for CPU training.
Every backward pass is checked against central finite differences in the test
suite; none of the math here is trusted without that oracle.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    """Input tensor incompatible with the layer's declared shapes."""


class DegenerateBatch(ValueError):
    """Batch statistics undefined (train-mode batch of fewer than 2 rows)."""


class Param:
    """One trainable array and its gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)


def he_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def trainable(self) -> list[Param]:
        return []

    def arrays(self) -> dict[str, np.ndarray]:
        """Persisted arrays: trainable values plus any running statistics."""
        return {}

    def set_array(self, key: str, value: np.ndarray) -> None:
        current = self.arrays()[key]
        if current.shape != value.shape:
            raise ShapeMismatch(f"{key}: stored {value.shape}, expected {current.shape}")
        current[...] = value

    def children(self) -> list[tuple[str, "Layer"]]:
        return []


def iter_layers(root: Layer, prefix: str = "") -> list[tuple[str, Layer]]:
    out = [(prefix, root)]
    for name, child in root.children():
        path = f"{prefix}.{name}" if prefix else name
        out.extend(iter_layers(child, path))
    return out


class Conv1d(Layer):
    """1D cross-correlation with 'same' zero padding, stride 1.

    Input (N, C_in, L) -> output (N, C_out, L). Even kernel sizes pad
    asymmetrically (left (k-1)//2, right k//2).
    """

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, dtype=np.float32):
        if kernel < 1:
            raise ShapeMismatch(f"kernel {kernel} must be positive")
        self.c_in = c_in
        self.c_out = c_out
        self.kernel = kernel
        self.pad_left = (kernel - 1) // 2
        self.pad_right = kernel // 2
        self.weight = Param(he_uniform((c_out, c_in, kernel), c_in * kernel, rng, dtype))
        self.bias = Param(np.zeros(c_out, dtype=dtype))
        self._cols = None

    def trainable(self) -> list[Param]:
        return [self.weight, self.bias]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight.value, "bias": self.bias.value}

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.c_in:
            raise ShapeMismatch(f"expected (N, {self.c_in}, L), got {x.shape}")
        n, _, length = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad_left, self.pad_right)))
        s0, s1, s2 = xp.strides
        cols = np.lib.stride_tricks.as_strided(
            xp, shape=(n, self.c_in, self.kernel, length), strides=(s0, s1, s2, s2)
        )
        self._cols = cols
        out = np.tensordot(self.weight.value, cols, axes=([1, 2], [1, 2]))  # (F, N, L)
        out = np.ascontiguousarray(out.transpose(1, 0, 2))
        out += self.bias.value[None, :, None]
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        cols = self._cols
        n, _, length = dout.shape
        self.bias.grad += dout.sum(axis=(0, 2))
        self.weight.grad += np.tensordot(dout, cols, axes=([0, 2], [0, 3]))
        dxp = np.zeros((n, self.c_in, length + self.kernel - 1), dtype=dout.dtype)
        w = self.weight.value
        for j in range(self.kernel):
            # dcols[n, c, j, t] = sum_f dout[n, f, t] * w[f, c, j]
            contrib = np.tensordot(dout, w[:, :, j], axes=([1], [0]))  # (N, L, C)
            dxp[:, :, j : j + length] += contrib.transpose(0, 2, 1)
        return dxp[:, :, self.pad_left : self.pad_left + length]


class Dense(Layer):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32):
        self.d_in = d_in
        self.d_out = d_out
        self.weight = Param(he_uniform((d_out, d_in), d_in, rng, dtype))
        self.bias = Param(np.zeros(d_out, dtype=dtype))
        self._x = None

    def trainable(self) -> list[Param]:
        return [self.weight, self.bias]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight.value, "bias": self.bias.value}

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeMismatch(f"expected (N, {self.d_in}), got {x.shape}")
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.weight.grad += dout.T @ self._x
        self.bias.grad += dout.sum(axis=0)
        return dout @ self.weight.value


class BatchNorm(Layer):
    """Per-channel batch normalization for (N, C, L) or (N, D) inputs.

    Train mode normalizes with biased batch statistics and updates the
    running estimates as 0.9 * running + 0.1 * batch; inference mode uses the
    running estimates, making it batch-size invariant.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Param(np.ones(channels, dtype=dtype))
        self.beta = Param(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def trainable(self) -> list[Param]:
        return [self.gamma, self.beta]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "gamma": self.gamma.value,
            "beta": self.beta.value,
            "running_mean": self.running_mean,
            "running_var": self.running_var,
        }

    def _axes_and_shape(self, x: np.ndarray):
        if x.ndim == 3:
            if x.shape[1] != self.channels:
                raise ShapeMismatch(f"expected channel dim {self.channels}, got {x.shape}")
            return (0, 2), (1, self.channels, 1)
        if x.ndim == 2:
            if x.shape[1] != self.channels:
                raise ShapeMismatch(f"expected feature dim {self.channels}, got {x.shape}")
            return (0,), (1, self.channels)
        raise ShapeMismatch(f"expected 2D or 3D input, got {x.shape}")

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        axes, bshape = self._axes_and_shape(x)
        if train:
            if x.shape[0] < 2:
                raise DegenerateBatch(f"batch of {x.shape[0]} in train mode")
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.running_mean *= m
            self.running_mean += ((1.0 - m) * mu).astype(self.running_mean.dtype)
            self.running_var *= m
            self.running_var += ((1.0 - m) * var).astype(self.running_var.dtype)
        else:
            mu = self.running_mean
            var = self.running_var
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu.reshape(bshape)) * invstd.reshape(bshape)
        if train:
            size = x.size // self.channels
            self._cache = (xhat, invstd, axes, bshape, size)
        return self.gamma.value.reshape(bshape) * xhat + self.beta.value.reshape(bshape)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, invstd, axes, bshape, m = self._cache
        dgamma = (dout * xhat).sum(axis=axes)
        dbeta = dout.sum(axis=axes)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        g = self.gamma.value.reshape(bshape)
        dxhat = dout * g
        term = (
            m * dxhat
            - dxhat.sum(axis=axes).reshape(bshape)
            - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape)
        )
        return term * invstd.reshape(bshape) / m


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, x.dtype.type(0))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dout, dout.dtype.type(0))


class GlobalAvgPool(Layer):
    """(N, C, L) -> (N, C) mean over the time axis."""

    def __init__(self):
        self._length = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.ndim != 3:
            raise ShapeMismatch(f"expected 3D input, got {x.shape}")
        self._length = x.shape[2]
        return x.mean(axis=2)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        scale = dout.dtype.type(1.0 / self._length)
        return np.repeat(dout[:, :, None] * scale, self._length, axis=2)


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._shape)


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def children(self):
        return [(str(i), layer) for i, layer in enumerate(self.layers)]

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


class ResidualBlock(Layer):
    """activation(main(x) + shortcut(x)); identity shortcut when None."""

    def __init__(self, main: Sequential, shortcut: Sequential | None):
        self.main = main
        self.shortcut = shortcut
        self._mask = None

    def children(self):
        out = [("main", self.main)]
        if self.shortcut is not None:
            out.append(("shortcut", self.shortcut))
        return out

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        h = self.main.forward(x, train)
        s = self.shortcut.forward(x, train) if self.shortcut is not None else x
        if h.shape != s.shape:
            raise ShapeMismatch(f"main {h.shape} vs shortcut {s.shape}")
        pre = h + s
        self._mask = pre > 0
        return np.where(self._mask, pre, pre.dtype.type(0))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dpre = np.where(self._mask, dout, dout.dtype.type(0))
        dx = self.main.backward(dpre)
        if self.shortcut is not None:
            dx = dx + self.shortcut.backward(dpre)
        else:
            dx = dx + dpre
        return dx


class ChannelSplit(Layer):
    """Routes each input channel through its own branch, concatenated on axis 1.

    Branch outputs may be (N, F, L) stems (merged into a channel stack for a
    shared trunk) or (N, F) pooled features (merged into one feature vector).
    """

    def __init__(self, branches: list[Sequential]):
        self.branches = branches
        self._widths = None

    def children(self):
        return [(f"branch{i}", b) for i, b in enumerate(self.branches)]

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != len(self.branches):
            raise ShapeMismatch(
                f"expected (N, {len(self.branches)}, L) for split input, got {x.shape}"
            )
        outs = [b.forward(x[:, i : i + 1, :], train) for i, b in enumerate(self.branches)]
        self._widths = [o.shape[1] for o in outs]
        return np.concatenate(outs, axis=1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n = dout.shape[0]
        length = None
        pieces = []
        offset = 0
        for b, w in zip(self.branches, self._widths):
            d = dout[:, offset : offset + w]
            offset += w
            piece = b.backward(d)
            if length is None:
                length = piece.shape[2]
            pieces.append(piece)
        dx = np.empty((n, len(self.branches), length), dtype=dout.dtype)
        for i, piece in enumerate(pieces):
            dx[:, i : i + 1, :] = piece
        return dx


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray, class_weights: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits.

    With class weights, per-sample losses are weighted by the weight of the
    true class and renormalized by the weight sum.
    """
    n = logits.shape[0]
    p = softmax(logits)
    idx = np.arange(n)
    logp = np.log(np.maximum(p[idx, labels], np.finfo(p.dtype).tiny))
    onehot = np.zeros_like(p)
    onehot[idx, labels] = 1.0
    if class_weights is None:
        loss = float(-logp.mean())
        dlogits = (p - onehot) / n
    else:
        w = np.asarray(class_weights, dtype=p.dtype)[labels]
        total = w.sum()
        loss = float(-(w * logp).sum() / total)
        dlogits = (p - onehot) * (w / total)[:, None]
    return loss, dlogits.astype(logits.dtype)
