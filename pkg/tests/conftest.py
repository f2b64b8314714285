import numpy as np
import pytest

from stratrob.nn import DenseNet, Layer


def linear_net(W, b=None):
    W = np.asarray(W, dtype=float)
    b = np.zeros(W.shape[0]) if b is None else np.asarray(b, dtype=float)
    return DenseNet([Layer(W, b, "identity")])


def random_net(rng, d, K, hidden=()):
    sizes = [d, *hidden, K]
    layers = []
    for i in range(len(sizes) - 1):
        act = "relu" if i < len(sizes) - 2 else "identity"
        layers.append(Layer(rng.normal(size=(sizes[i + 1], sizes[i])), rng.normal(size=sizes[i + 1]) * 0.5, act))
    return DenseNet(layers)


def fd_grad(f, x, h=1e-5):
    """Central finite differences of scalar ``f`` at array ``x`` (any shape)."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1e-7, np.abs(a) + np.abs(b))))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
