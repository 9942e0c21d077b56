"""Central finite-difference oracle for layer gradients (64-bit, h=1e-4)."""

import numpy as np


def fd_gradcheck(layer, x, h=1e-4, seed=1):
    """Max relative error between analytic and finite-difference gradients.

    Loss is sum(forward(x) * R) for a fixed random projection R, giving a
    scalar objective whose exact input/parameter gradients the layer's
    backward pass must reproduce. Checks the input gradient and every
    parameter gradient; returns the worst relative error.
    """
    assert x.dtype == np.float64, "gradient checks run in 64-bit"
    out = layer.forward(x, train=True)
    r = np.random.default_rng(seed).normal(size=out.shape)

    for p in layer.trainable():
        p.grad[...] = 0
    dx = layer.backward(r.copy())

    def loss_at(xv):
        return float((layer.forward(xv, train=True) * r).sum())

    worst = 0.0

    def compare(analytic, fd):
        nonlocal worst
        scale = max(np.abs(fd).max(), np.abs(analytic).max(), 1e-8)
        worst = max(worst, float(np.abs(analytic - fd).max() / scale))

    fd = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        up = loss_at(x)
        x[i] = orig - h
        down = loss_at(x)
        x[i] = orig
        fd[i] = (up - down) / (2 * h)
    compare(dx, fd)

    for p in layer.trainable():
        fd = np.zeros_like(p.value)
        it = np.nditer(p.value, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = p.value[i]
            p.value[i] = orig + h
            up = loss_at(x)
            p.value[i] = orig - h
            down = loss_at(x)
            p.value[i] = orig
            fd[i] = (up - down) / (2 * h)
        compare(p.grad, fd)
    return worst
