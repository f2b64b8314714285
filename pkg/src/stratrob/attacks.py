"""L-infinity perturbation procedures: adversarial, targeted and strategic responses.

Every attack has a batched form (``*_batch``) operating on ``(N, d)`` inputs with
per-row labels/targets, and a single-example wrapper returning an
:class:`AttackOutcome`. Rows never interact, so a row's trajectory is the same
whether it is attacked alone or inside a batch (given the same start).
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import CapacityError, InputError
from .utilities import UtilityMatrix, targets_of

MAX_ORACLE_POINTS = 1_000_000


@dataclass(frozen=True)
class AttackSpec:
    radius: float
    steps: int = 20
    step_size: float = 0.0039
    random_start: bool = False
    seed: int = 0
    norm: str = "linf"

    def __post_init__(self):
        if self.norm != "linf":
            raise InputError("only the linf threat model is supported")
        if self.radius < 0 or self.steps < 1 or self.step_size <= 0:
            raise InputError("need radius >= 0, steps >= 1, step_size > 0")

    @classmethod
    def heuristic(cls, radius, steps, **kw):
        """Step size 2.5 * radius / steps."""
        return cls(radius=radius, steps=steps, step_size=2.5 * radius / steps if radius > 0 else 1e-3, **kw)

    def with_seed(self, seed) -> "AttackSpec":
        return replace(self, seed=int(seed))

    def to_text(self) -> str:
        return (f"linf:r={self.radius!r},steps={self.steps},step={self.step_size!r},"
                f"rand={int(self.random_start)},seed={self.seed}")

    @classmethod
    def parse(cls, text: str) -> "AttackSpec":
        text = text.strip()
        if text in PRESETS:
            return PRESETS[text]
        m = re.fullmatch(r"linf:(.*)", text)
        if not m:
            raise InputError(f"bad attack spec {text!r}")
        fields = {}
        for part in m.group(1).split(","):
            key, eq, val = part.partition("=")
            if not eq:
                raise InputError(f"bad attack spec field {part!r}")
            fields[key.strip()] = val.strip()
        unknown = set(fields) - {"r", "steps", "step", "rand", "seed"}
        if unknown or "r" not in fields:
            raise InputError(f"bad attack spec {text!r}")
        try:
            r = float(eval_fraction(fields["r"]))
            steps = int(fields.get("steps", 20))
            step = float(eval_fraction(fields["step"])) if "step" in fields else 2.5 * r / steps
            return cls(radius=r, steps=steps, step_size=step,
                       random_start=fields.get("rand", "0") == "1", seed=int(fields.get("seed", 0)))
        except ValueError as exc:
            raise InputError(f"bad attack spec {text!r}: {exc}") from None


def eval_fraction(s: str) -> float:
    """Accept plain floats and simple fractions such as ``8/255``."""
    if "/" in s:
        a, b = s.split("/")
        return float(a) / float(b)
    return float(s)


PRESETS = {
    "paper-train": AttackSpec(radius=8 / 255, steps=7, step_size=0.011, random_start=True),
    "paper-eval": AttackSpec(radius=8 / 255, steps=20, step_size=0.0039, random_start=False),
}


@dataclass
class AttackOutcome:
    delta: np.ndarray
    predicted: int
    achieved_utility: float
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def success(self) -> bool:
        return self.achieved_utility > 0


@dataclass
class AttackBatch:
    """Row-aligned results for a batch of attacks."""

    delta: np.ndarray  # (N, d)
    predicted: np.ndarray  # (N,)
    utility: np.ndarray  # (N,)
    trace: np.ndarray  # (N, steps + 1)

    @property
    def success(self) -> np.ndarray:
        return self.utility > 0

    def __len__(self):
        return len(self.predicted)

    def outcome(self, i: int) -> AttackOutcome:
        return AttackOutcome(self.delta[i].copy(), int(self.predicted[i]),
                             float(self.utility[i]), self.trace[i].copy())

    @classmethod
    def empty(cls, d: int, steps: int = 0):
        return cls(np.zeros((0, d)), np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, steps + 1)))


def project_linf(delta, r: float) -> np.ndarray:
    if r < 0:
        raise InputError("radius must be non-negative")
    return np.clip(np.asarray(delta, dtype=np.float64), -r, r)


def _prepare(net, X, labels):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InputError(f"expected (N, {net.input_dim}) inputs, got {X.shape}")
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if labels.shape != (X.shape[0],):
        raise InputError("one label per row is required")
    if np.any(labels < 0) or np.any(labels >= net.num_classes):
        raise InputError("label out of range")
    return X, labels


def _start(spec: AttackSpec, shape):
    if spec.random_start and spec.radius > 0:
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(-spec.radius, spec.radius, size=shape)
    return np.zeros(shape)


def run_pgd(net, X, spec: AttackSpec, objective, utility_of, bounds=None) -> AttackBatch:
    """Signed-gradient ascent on ``objective`` inside the L-infinity ball.

    ``objective(probs) -> (values, dvalues/dlogits)`` and
    ``utility_of(predictions) -> realized utility`` act row-wise. The last
    iterate is returned unless an earlier one realized strictly higher utility,
    in which case the earliest such iterate wins.
    """
    N, d = X.shape
    r = spec.radius
    delta = project_linf(_start(spec, (N, d)), r)
    if bounds is not None:
        delta = np.clip(X + delta, bounds[0], bounds[1]) - X
    trace = np.empty((N, spec.steps + 1))
    best_delta = delta.copy()
    best_pred = np.zeros(N, dtype=int)
    best_util = np.full(N, -np.inf)
    for step in range(spec.steps + 1):
        acts, pre = nn._forward_cache(net, X + delta)
        logits = pre[-1]
        value, dz = objective(nn.softmax(logits))
        trace[:, step] = value
        pred = np.argmax(logits, axis=1)
        util = utility_of(pred)
        if step == spec.steps:
            break
        better = util > best_util
        best_util = np.where(better, util, best_util)
        best_pred = np.where(better, pred, best_pred)
        best_delta[better] = delta[better]
        _, g = nn._backprop(net, acts, pre, dz, need_params=False)
        delta = np.clip(delta + spec.step_size * np.sign(g), -r, r)
        if bounds is not None:
            delta = np.clip(X + delta, bounds[0], bounds[1]) - X
    keep_last = util >= best_util
    delta = np.where(keep_last[:, None], delta, best_delta)
    pred = np.where(keep_last, pred, best_pred)
    util = np.where(keep_last, util, best_util)
    return AttackBatch(delta, pred, util, trace)


def _mask_from_targets(targets, N, K):
    """Normalize per-row target sets (list of iterables or (N, K) bool array)."""
    if isinstance(targets, np.ndarray) and targets.dtype == bool:
        mask = targets
    else:
        mask = np.zeros((N, K), dtype=bool)
        for i, ts in enumerate(targets):
            ts = list(ts)
            if any(t < 0 or t >= K for t in ts):
                raise InputError("target out of range")
            mask[i, ts] = True
    if mask.shape != (N, K):
        raise InputError("target mask must be (N, K)")
    if not mask.any(axis=1).all():
        raise InputError("empty target set")
    return mask


# -- batched attacks -----------------------------------------------------------


def pgd_untargeted_batch(net, X, y, spec, bounds=None) -> AttackBatch:
    """Descend ``p(y | x + delta)``; utility is 1 on misclassification."""
    X, y = _prepare(net, X, y)
    rows = np.arange(len(y))

    def objective(p):
        onehot = np.zeros_like(p)
        onehot[rows, y] = 1.0
        py = p[rows, y]
        return -py, -py[:, None] * (onehot - p)

    return run_pgd(net, X, spec, objective, lambda pred: (pred != y).astype(float), bounds)


def multi_target_batch(net, X, targets, spec, penalized=False, bounds=None) -> AttackBatch:
    """Ascend ``max_{t in T} p(t | x + delta)`` per row (optionally penalizing non-targets).

    ``targets``: per-row target sets or an (N, K) boolean mask. Utility is
    ``1{prediction in T}``.
    """
    X = np.asarray(X, dtype=np.float64)
    X, _ = _prepare(net, X, np.zeros(len(X), dtype=int))
    mask = _mask_from_targets(targets, len(X), net.num_classes)
    w = mask.astype(np.float64)
    pen = ~mask if penalized else None
    rows = np.arange(len(X))
    return run_pgd(net, X, spec, lambda p: nn.proxy_objective(p, w, pen),
                   lambda pred: mask[rows, pred].astype(float), bounds)


def pgd_targeted_batch(net, X, target, spec, bounds=None) -> AttackBatch:
    X = np.asarray(X, dtype=np.float64)
    target = np.broadcast_to(np.asarray(target, dtype=int), (len(X),))
    if np.any(target < 0) or np.any(target >= net.num_classes):
        raise InputError("target out of range")
    mask = np.zeros((len(X), net.num_classes), dtype=bool)
    mask[np.arange(len(X)), target] = True
    return multi_target_batch(net, X, mask, spec, bounds=bounds)


def utility_weighted_batch(net, X, y, u: UtilityMatrix, spec, bounds=None) -> AttackBatch:
    """Ascend ``max_k u(y, k) p(k | x + delta)``; utility is ``u(y, prediction)``."""
    X, y = _prepare(net, X, y)
    W = u.values[y]
    if not (W > 0).any(axis=1).all():
        raise InputError("utility row is all zero")
    return run_pgd(net, X, spec, lambda p: nn.proxy_objective(p, W),
                   lambda pred: W[np.arange(len(y)), pred], bounds)


def sequential_batch(net, X, y, u: UtilityMatrix, spec, bounds=None, oracle_grid=None) -> AttackBatch:
    """Targets in decreasing utility, first targeted success wins; else the top target's attempt.

    Rows whose utility row is all zero are left unattacked. With
    ``oracle_grid`` each targeted sub-attack is the exhaustive grid oracle.
    """
    X, y = _prepare(net, X, y)
    N, d = X.shape
    order = [targets_of(u, int(c)) for c in y]
    clean = np.argmax(nn.forward(net, X), axis=1) if N else np.zeros(0, dtype=int)
    delta = np.zeros((N, d))
    pred = clean.copy()
    done = np.zeros(N, dtype=bool)
    trace = np.zeros((N, 1 if oracle_grid else spec.steps + 1))
    depth = max((len(o) for o in order), default=0)
    grids = {}
    for rank in range(depth):
        idx = np.array([i for i in range(N) if not done[i] and len(order[i]) > rank], dtype=int)
        if idx.size == 0:
            continue
        tgt = np.array([order[i][rank] for i in idx])
        if oracle_grid:
            for i in idx:
                if i not in grids:
                    grids[i] = grid_predictions(net, X[i], spec.radius, oracle_grid)
            res = [oracle_attack(net, X[i], int(y[i]), (int(t),), spec.radius, oracle_grid, grids[i])
                   for i, t in zip(idx, tgt)]
            d_new = np.array([o.delta for o in res]).reshape(len(idx), d)
            p_new = np.array([o.predicted for o in res])
            tr = np.zeros((len(idx), 1))
        else:
            b = pgd_targeted_batch(net, X[idx], tgt, spec, bounds)
            d_new, p_new, tr = b.delta, b.predicted, b.trace
        hit = p_new == tgt
        if rank == 0:
            # fallback: keep the attempt on the most preferred target
            delta[idx], pred[idx], trace[idx] = d_new, p_new, tr
        else:
            delta[idx[hit]], pred[idx[hit]], trace[idx[hit]] = d_new[hit], p_new[hit], tr[hit]
        done[idx[hit]] = True
    util = u.values[y, pred]
    return AttackBatch(delta, pred, util, trace)


def noisy_response_batch(net, X, y, targets, eps, spec, rng, bounds=None):
    """Strategic response, except each row is replaced w.p. ``eps`` by a targeted
    attack on a class drawn uniformly from [K] (possibly y itself).

    Returns the batch (utility measured against the original ``T``) and the
    boolean replacement mask.
    """
    if not 0.0 <= eps <= 1.0:
        raise InputError("eps must lie in [0, 1]")
    X, y = _prepare(net, X, y)
    N, K = len(X), net.num_classes
    mask = _mask_from_targets(targets, N, K)
    replaced = rng.random(N) < eps
    rand_t = rng.integers(K, size=N)
    attack_mask = mask.copy()
    attack_mask[replaced] = False
    attack_mask[np.nonzero(replaced)[0], rand_t[replaced]] = True
    b = multi_target_batch(net, X, attack_mask, spec, bounds=bounds)
    b.utility = mask[np.arange(N), b.predicted].astype(float)
    return b, replaced


# -- single-example API ----------------------------------------------------------


def _one(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("expected a single d-vector")
    return x[None, :]


def pgd_untargeted(net, x, y, spec, bounds=None) -> AttackOutcome:
    return pgd_untargeted_batch(net, _one(x), [y], spec, bounds).outcome(0)


def pgd_targeted(net, x, target, spec, bounds=None) -> AttackOutcome:
    return pgd_targeted_batch(net, _one(x), [target], spec, bounds).outcome(0)


def _check_T(T, y, K):
    T = tuple(int(t) for t in T)
    if not T:
        raise InputError("empty target set")
    if y in T or any(t < 0 or t >= K for t in T):
        raise InputError("targets must be a subset of [K] without the true label")
    return T


def strategic_response(net, x, y, T, spec, bounds=None) -> AttackOutcome:
    T = _check_T(T, y, net.num_classes)
    return multi_target_batch(net, _one(x), [T], spec, bounds=bounds).outcome(0)


def preference_response(net, x, y, T, spec, bounds=None) -> AttackOutcome:
    """Targets-minus-best-non-target objective; success iff the prediction lands in T."""
    T = _check_T(T, y, net.num_classes)
    return multi_target_batch(net, _one(x), [T], spec, penalized=True, bounds=bounds).outcome(0)


def sequential_attack(net, x, y, u: UtilityMatrix, spec, bounds=None, oracle_grid=None) -> AttackOutcome:
    return sequential_batch(net, _one(x), [y], u, spec, bounds, oracle_grid).outcome(0)


def utility_weighted_attack(net, x, y, u: UtilityMatrix, spec, bounds=None) -> AttackOutcome:
    return utility_weighted_batch(net, _one(x), [y], u, spec, bounds).outcome(0)


def noisy_response(net, x, y, T, eps, spec, rng, bounds=None) -> AttackOutcome:
    T = _check_T(T, y, net.num_classes)
    b, _ = noisy_response_batch(net, _one(x), [y], [T], eps, spec, rng, bounds)
    return b.outcome(0)


# -- exhaustive oracle ---------------------------------------------------------------


def grid_deltas(d: int, radius: float, points: int) -> np.ndarray:
    """Uniform grid over [-r, r]^d, lexicographic order; the zero vector comes first.

    Zero-first ordering makes a failed oracle attack a no-op, so realized
    accuracies keep the clean >= strategic >= adversarial chain exactly.
    """
    if points < 1:
        raise InputError("grid needs at least one point per dimension")
    if points ** d > MAX_ORACLE_POINTS:
        raise CapacityError(f"{points}^{d} grid points exceed {MAX_ORACLE_POINTS}")
    if radius == 0 or points == 1:
        return np.zeros((1, d))
    axis = np.linspace(-radius, radius, points)
    grid = np.array(list(itertools.product(axis, repeat=d)))
    zero = np.all(grid == 0.0, axis=1)
    return np.concatenate([np.zeros((1, d)), grid[~zero]])


def grid_predictions(net, x, radius, points):
    deltas = grid_deltas(net.input_dim, radius, points)
    x = np.asarray(x, dtype=np.float64)
    return deltas, np.argmax(nn.forward(net, x[None, :] + deltas), axis=1)


def oracle_attack(net, x, y, objective, radius, grid_points, cache=None) -> AttackOutcome:
    """Exhaustive search of the grid for the utility-maximal perturbation.

    ``objective`` is either a K-vector utility row or an iterable target set
    (utility 1 on the set). ``cache`` may hold precomputed
    ``grid_predictions`` output for this ``x``.
    """
    K = net.num_classes
    if isinstance(objective, np.ndarray) and objective.dtype != bool and objective.shape == (K,):
        row = objective.astype(np.float64)
    else:
        row = np.zeros(K)
        row[list(objective)] = 1.0
    deltas, preds = cache if cache is not None else grid_predictions(net, x, radius, grid_points)
    vals = row[preds]
    i = int(np.argmax(vals))
    return AttackOutcome(deltas[i].copy(), int(preds[i]), float(vals[i]), np.array([vals[i]]))
