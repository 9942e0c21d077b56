"""Adam training loop with plateau learning-rate halving and early stopping.

Schedule: initial learning rate 0.001 (0.002 when batch normalization is
enabled), halved when the validation loss has not improved for 10 epochs,
training stopped after 15 non-improving epochs, at most 600 epochs. Batch
size defaults to 64/128/256 for sequence lengths 360/1080/1800. Gaussian
input noise (sigma 0.01) is applied in the training phase only, never to
padded rows. Single-threaded runs with a fixed seed are bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .layers import Param, softmax_cross_entropy
from .model import Network

BATCH_SIZE_BY_LEN = {360: 64, 1080: 128, 1800: 256}


class EmptySplit(ValueError):
    """A required dataset split has no sequences."""


class DivergedLoss(RuntimeError):
    """Loss became NaN or infinite."""


def default_batch_size(seq_len: int) -> int:
    return BATCH_SIZE_BY_LEN.get(seq_len, 64)


def default_learning_rate(batchnorm: bool) -> float:
    return 0.002 if batchnorm else 0.001


@dataclass
class TrainConfig:
    learning_rate: float | None = None  # None: resolved from the batch-norm flag
    plateau_patience: int = 10
    early_stop_patience: int = 15
    max_epochs: int = 600
    batch_size: int | None = None  # None: resolved from the sequence length
    noise_sigma: float = 0.01
    seed: int = 0
    class_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.plateau_patience <= 0 or self.early_stop_patience <= 0 or self.max_epochs <= 0:
            raise ValueError("patience and epoch limits must be positive")


class Adam:
    def __init__(self, params: list[Param], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= (lr / corr1) * m / (np.sqrt(v / corr2) + self.eps)
            p.grad[...] = 0

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"adam.m{i}"] = m
            out[f"adam.v{i}"] = v
        return out


def add_input_noise(
    batch: np.ndarray,
    sigma: float,
    rng: np.random.Generator,
    true_lengths: np.ndarray | None = None,
) -> np.ndarray:
    """Add i.i.d. Gaussian noise to a (N, C, L) batch; padded rows stay zero."""
    if sigma == 0.0:
        return batch
    noise = rng.normal(0.0, sigma, size=batch.shape).astype(batch.dtype)
    if true_lengths is not None:
        steps = np.arange(batch.shape[2])
        mask = steps[None, :] < np.asarray(true_lengths)[:, None]  # (N, L)
        noise *= mask[:, None, :]
    return batch + noise


def evaluate(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    batch_size: int = 256,
    class_weights: np.ndarray | None = None,
) -> tuple[float, float]:
    """Inference-mode mean loss and accuracy over a split."""
    total_loss = 0.0
    correct = 0
    for lo in range(0, len(x), batch_size):
        xb = x[lo : lo + batch_size]
        yb = y[lo : lo + batch_size]
        logits = net.forward(xb, train=False)
        loss, _ = softmax_cross_entropy(logits, yb, class_weights)
        total_loss += loss * len(xb)
        correct += int((logits.argmax(axis=1) == yb).sum())
    return total_loss / len(x), correct / len(x)


def train(
    net: Network,
    train_data: tuple[np.ndarray, np.ndarray, np.ndarray | None],
    val_data: tuple[np.ndarray, np.ndarray, np.ndarray | None],
    cfg: TrainConfig,
) -> Checkpoint:
    """Train to the best-validation checkpoint under the plateau/early-stop schedule."""
    x, y, tl = train_data
    xv, yv, _ = val_data
    if len(x) == 0:
        raise EmptySplit("training split is empty")
    if len(xv) == 0:
        raise EmptySplit("validation split is empty")

    batchnorm = any(b.batchnorm for b in net.config.blocks)
    lr = cfg.learning_rate if cfg.learning_rate is not None else default_learning_rate(batchnorm)
    batch_size = cfg.batch_size if cfg.batch_size is not None else default_batch_size(net.config.seq_len)
    weights = np.asarray(cfg.class_weights, dtype=np.float64) if cfg.class_weights else None

    opt = Adam(net.trainable())
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []
    best_val = np.inf
    best_state = net.state()
    best_epoch = 0
    plateau = 0
    since_improve = 0

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        perm = rng.permutation(len(x))
        epoch_loss = 0.0
        epoch_correct = 0
        processed = 0
        for lo in range(0, len(x), batch_size):
            idx = perm[lo : lo + batch_size]
            if batchnorm and len(idx) < 2:
                continue  # batch statistics undefined; skip the leftover sample
            xb = x[idx]
            if cfg.noise_sigma > 0.0:
                xb = add_input_noise(xb, cfg.noise_sigma, rng, None if tl is None else tl[idx])
            yb = y[idx]
            logits = net.forward(xb, train=True)
            loss, dlogits = softmax_cross_entropy(logits, yb, weights)
            net.backward(dlogits)
            opt.step(lr)
            epoch_loss += loss * len(idx)
            epoch_correct += int((logits.argmax(axis=1) == yb).sum())
            processed += len(idx)
        if processed == 0:
            raise EmptySplit("training split too small for batch statistics")
        train_loss = epoch_loss / processed
        val_loss, val_acc = evaluate(net, xv, yv, batch_size, weights)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergedLoss(f"epoch {epoch}: train {train_loss}, val {val_loss}")
        history.append(
            {
                "epoch": epoch,
                "lr": lr,
                "train_loss": train_loss,
                "train_acc": epoch_correct / processed,
                "val_loss": val_loss,
                "val_acc": val_acc,
                "seconds": time.perf_counter() - t0,
            }
        )
        if val_loss < best_val:
            best_val = val_loss
            best_state = net.state()
            best_epoch = epoch
            plateau = 0
            since_improve = 0
        else:
            plateau += 1
            since_improve += 1
            if since_improve >= cfg.early_stop_patience:
                break
            if plateau >= cfg.plateau_patience:
                lr *= 0.5
                plateau = 0

    net.load_state(best_state)
    return Checkpoint(
        config=net.config,
        state=best_state,
        optimizer_state=opt.state_arrays(),
        optimizer_step=opt.t,
        history=history,
        best_epoch=best_epoch,
    )
