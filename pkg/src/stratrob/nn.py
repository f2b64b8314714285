"""Dense feed-forward networks with exact gradients w.r.t. parameters and inputs.

Everything works in float64. Inputs may be a single ``(d,)`` vector or a batch
``(N, d)``; outputs follow the same convention.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class DenseNet:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise InputError("a network needs at least one layer")
        for i, layer in enumerate(self.layers):
            layer.weight = np.asarray(layer.weight, dtype=np.float64)
            layer.bias = np.asarray(layer.bias, dtype=np.float64)
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.out_dim,):
                raise InputError(f"layer {i}: bias must match weight rows")
            if layer.activation not in ACTIVATIONS:
                raise InputError(f"layer {i}: unknown activation {layer.activation!r}")
            if i > 0 and layer.in_dim != self.layers[i - 1].out_dim:
                raise InputError(f"layer {i}: in_dim {layer.in_dim} does not chain")
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise InputError(f"layer {i}: non-finite parameters")
        if self.layers[-1].activation != "identity":
            raise InputError("the last layer must output raw logits (identity)")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim

    @classmethod
    def init(cls, sizes, seed=0) -> "DenseNet":
        """Glorot-uniform network with layer widths ``sizes = [d, h1, ..., K]``."""
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise InputError(f"invalid layer sizes {sizes}")
        rng = np.random.default_rng(seed)
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            s = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-s, s, size=(n_out, n_in))
            act = "identity" if i == len(sizes) - 2 else "relu"
            layers.append(Layer(w, np.zeros(n_out), act))
        return cls(layers)

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def params(self):
        for layer in self.layers:
            yield layer.weight
            yield layer.bias

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "layers": [
                {
                    "rows": l.out_dim,
                    "cols": l.in_dim,
                    "activation": l.activation,
                    "weights": [float(v) for v in l.weight.ravel()],
                    "biases": [float(v) for v in l.bias],
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DenseNet":
        try:
            layers = [
                Layer(
                    np.array(l["weights"], dtype=np.float64).reshape(l["rows"], l["cols"]),
                    np.array(l["biases"], dtype=np.float64),
                    l["activation"],
                )
                for l in doc["layers"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed network document: {exc}") from exc
        net = cls(layers)
        if net.input_dim != doc.get("input_dim") or net.num_classes != doc.get("num_classes"):
            raise InputError("declared input_dim/num_classes disagree with layers")
        return net

    def save(self, path) -> None:
        # json writes floats with repr(), the shortest string that round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "DenseNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class GradientBundle:
    param_grads: list[tuple[np.ndarray, np.ndarray]]  # (dW, db) per layer
    input_grad: np.ndarray

    def params(self):
        for dw, db in self.param_grads:
            yield dw
            yield db


def _as_batch(net: DenseNet, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InputError(f"expected inputs of dimension {net.input_dim}, got shape {x.shape}")
    return X, single


def _forward_cache(net: DenseNet, X: np.ndarray):
    """Run the net on a batch and keep every layer input and pre-activation."""
    acts, pre = [X], []
    h = X
    for layer in net.layers:
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        acts.append(h)
    return acts, pre


def _backprop(net: DenseNet, acts, pre, dlogits: np.ndarray, need_params=True):
    """Push d(objective)/d(logits) back through the net.

    Returns per-layer summed parameter gradients and the per-row input gradient.
    """
    grads = []
    g = dlogits
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation == "relu":
            g = g * (pre[i] > 0.0)  # subgradient 0 at the kink
        if need_params:
            grads.append((g.T @ acts[i], g.sum(axis=0)))
        g = g @ layer.weight
    grads.reverse()
    return grads, g


def forward(net: DenseNet, x) -> np.ndarray:
    X, single = _as_batch(net, x)
    if not np.all(np.isfinite(X)):
        raise InputError("non-finite input")
    logits = _forward_cache(net, X)[1][-1]
    return logits[0] if single else logits


def predict(net: DenseNet, x):
    """Argmax class; ``np.argmax`` resolves exact ties to the lowest index."""
    logits = forward(net, x)
    return np.argmax(logits, axis=-1)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InputError("non-finite logits")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, y):
    """``-log softmax(logits)[y]``; vectorised over a leading batch axis."""
    logits = np.asarray(logits, dtype=np.float64)
    K = logits.shape[-1]
    y_arr = np.asarray(y)
    if np.any(y_arr < 0) or np.any(y_arr >= K):
        raise InputError(f"label out of range for K={K}")
    lp = log_softmax(logits)
    if logits.ndim == 1:
        return float(-lp[int(y)])
    return -lp[np.arange(len(lp)), y_arr]


def backward(net: DenseNet, x, y):
    """Cross-entropy loss and its exact gradients.

    For a batch the loss (and every gradient) is that of the *mean* loss, so
    ``input_grad[i]`` is the per-example gradient divided by N.
    """
    X, single = _as_batch(net, x)
    Y = np.atleast_1d(np.asarray(y))
    if Y.shape != (X.shape[0],):
        raise InputError("one label per input row is required")
    if np.any(Y < 0) or np.any(Y >= net.num_classes):
        raise InputError("label out of range")
    N = X.shape[0]
    acts, pre = _forward_cache(net, X)
    logits = pre[-1]
    losses = cross_entropy(logits, Y)
    dz = softmax(logits)
    dz[np.arange(N), Y] -= 1.0
    dz /= N
    grads, gin = _backprop(net, acts, pre, dz)
    bundle = GradientBundle(grads, gin[0] if single else gin)
    return float(np.mean(losses)), bundle


def proxy_objective(probs: np.ndarray, weights: np.ndarray, penalty_mask=None):
    """Value and logit-gradient of ``max_k w_k p_k - max_{k in penalty} p_k``, row-wise.

    ``weights`` is (N, K) and non-negative; zero weights never win the first max
    as long as some weight is positive. Both maxima are resolved at the current
    point with lowest-index tie-breaking and then differentiated.
    """
    N, K = probs.shape
    rows = np.arange(N)
    wp = weights * probs
    a = np.argmax(wp, axis=1)
    value = wp[rows, a]
    onehot = np.zeros_like(probs)
    onehot[rows, a] = 1.0
    # d p_a / d z = p_a (e_a - p)
    dz = (weights[rows, a] * probs[rows, a])[:, None] * (onehot - probs)
    if penalty_mask is not None:
        has = penalty_mask.any(axis=1)
        masked = np.where(penalty_mask, probs, -np.inf)
        b = np.argmax(masked, axis=1)
        pb = np.where(has, probs[rows, b], 0.0)
        value = value - pb
        onehot_b = np.zeros_like(probs)
        onehot_b[rows, b] = 1.0
        dz = dz - pb[:, None] * (onehot_b - probs)
    return value, dz


def input_gradient(net: DenseNet, X: np.ndarray, dlogits_fn):
    """Gradient w.r.t. inputs of an objective given as a function of softmax probs."""
    acts, pre = _forward_cache(net, X)
    probs = softmax(pre[-1])
    value, dz = dlogits_fn(probs)
    _, gin = _backprop(net, acts, pre, dz, need_params=False)
    return value, gin, pre[-1]


def objective_gradient(net: DenseNet, x, targets, penalized=False, weights=None):
    """Gradient w.r.t. ``x`` of the multi-target proxy ``max_{t in T} p(t|x)``.

    With ``penalized=True`` the objective becomes
    ``max_{t in T} p(t|x) - max_{t not in T} p(t|x)``. ``weights`` (a K-vector)
    switches to the utility-weighted form ``max_k w_k p(k|x)`` and overrides
    ``targets``.
    """
    K = net.num_classes
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (K,) or not np.any(w > 0):
            raise InputError("weights must be a K-vector with a positive entry")
        mask = w > 0
    else:
        targets = list(targets)
        if not targets:
            raise InputError("empty target set")
        if any(t < 0 or t >= K for t in targets):
            raise InputError("target out of range")
        mask = np.zeros(K, dtype=bool)
        mask[targets] = True
        w = mask.astype(np.float64)
    X, single = _as_batch(net, x)
    pen = np.broadcast_to(~mask, (X.shape[0], K)) if penalized else None
    W = np.broadcast_to(w, (X.shape[0], K))
    _, gin, _ = input_gradient(net, X, lambda p: proxy_objective(p, W, pen))
    return gin[0] if single else gin


@dataclass
class SGDState:
    velocity: list[np.ndarray] = field(default_factory=list)


def sgd_step(net: DenseNet, grads: GradientBundle, lr: float, momentum: float = 0.0, state=None):
    """Heavy-ball SGD: ``v <- momentum * v + g``; ``p <- p - lr * v``. Mutates ``net``."""
    if lr <= 0 or not (0.0 <= momentum < 1.0):
        raise InputError("need lr > 0 and momentum in [0, 1)")
    if state is None:
        state = SGDState()
    if not state.velocity:
        state.velocity = [np.zeros_like(p) for p in net.params()]
    for p, g, v in zip(net.params(), grads.params(), state.velocity):
        v *= momentum
        v += g
        p -= lr * v
    return net, state
