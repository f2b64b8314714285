"""Accuracy measurement under clean, adversarial, strategic and sequential opponents.

Attacks decouple over true labels, so every quantity is assembled from cached
per-(class, target-set) attack predictions held by an :class:`AttackCache`.
Reusing one cache makes table composition, direct evaluation and worst-case
search mutually consistent to the last example.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import attacks, nn
from .attacks import AttackSpec
from .data import Dataset
from .errors import CapacityError, DomainError, InputError
from .utilities import (
    SemanticPartition,
    UncertaintySet,
    UtilityMatrix,
    enumerate_members,
    one_hot_utility,
    row_candidates,
    targets_of,
)


class AttackCache:
    """Post-attack predictions keyed by (class, attack).

    ``method="pgd"`` uses the signed-gradient attacks; ``method="oracle"`` uses
    the exhaustive grid with ``grid_points`` per dimension.
    """

    def __init__(self, net, data: Dataset, spec: AttackSpec, method="pgd", grid_points=None, bounds=None):
        if method not in ("pgd", "oracle"):
            raise InputError(f"unknown attack method {method!r}")
        if method == "oracle" and not grid_points:
            raise InputError("oracle evaluation needs grid_points")
        if data.K != net.num_classes or data.d != net.input_dim:
            raise InputError("network and dataset disagree on d or K")
        self.net, self.data, self.spec = net, data, spec
        self.method, self.grid_points, self.bounds = method, grid_points, bounds
        self.clean_pred = np.argmax(nn.forward(net, data.X), axis=1) if len(data) else np.zeros(0, int)
        self.class_idx = [np.nonzero(data.y == c)[0] for c in range(data.K)]
        self._preds = {}
        self._grids = {}
        self.attack_calls = 0

    @property
    def K(self):
        return self.data.K

    def _grid(self, i):
        if i not in self._grids:
            self._grids[i] = attacks.grid_predictions(self.net, self.data.X[i], self.spec.radius, self.grid_points)
        return self._grids[i]

    def _oracle(self, idx, objective_of):
        return np.array([
            attacks.oracle_attack(self.net, self.data.X[i], int(self.data.y[i]), objective_of(i),
                                  self.spec.radius, self.grid_points, self._grid(i)).predicted
            for i in idx
        ], dtype=int)

    def strategic(self, c: int, T: tuple) -> np.ndarray:
        """Predictions for class-``c`` examples under the multi-target response on ``T``."""
        T = tuple(sorted(T))
        key = (c, "T", T)
        if key not in self._preds:
            idx = self.class_idx[c]
            if not T or idx.size == 0:
                self._preds[key] = self.clean_pred[idx]
            elif self.method == "oracle":
                self._preds[key] = self._oracle(idx, lambda i: T)
            else:
                b = attacks.multi_target_batch(self.net, self.data.X[idx], [T] * idx.size, self.spec,
                                               bounds=self.bounds)
                self._preds[key] = b.predicted
            self.attack_calls += idx.size if T else 0
        return self._preds[key]

    def adversarial(self, c: int) -> np.ndarray:
        key = (c, "adv")
        if key not in self._preds:
            idx = self.class_idx[c]
            if idx.size == 0:
                self._preds[key] = np.zeros(0, dtype=int)
            elif self.method == "oracle":
                row = 1.0 - np.eye(self.K)[c]
                self._preds[key] = self._oracle(idx, lambda i: row)
            else:
                b = attacks.pgd_untargeted_batch(self.net, self.data.X[idx], self.data.y[idx], self.spec,
                                                 self.bounds)
                self._preds[key] = b.predicted
        return self._preds[key]

    def sequential(self, c: int, u: UtilityMatrix) -> np.ndarray:
        """Sequential [0,1] attack composed from cached single-target runs."""
        order = targets_of(u, c)
        idx = self.class_idx[c]
        if not order:
            return self.clean_pred[idx]
        pred = self.strategic(c, (order[0],)).copy()
        done = pred == order[0]
        for t in order[1:]:
            p = self.strategic(c, (t,))
            hit = ~done & (p == t)
            pred[hit] = t
            done |= hit
        return pred

    def correct(self, c: int, preds) -> int:
        return int(np.sum(np.asarray(preds) == c))


# -- accuracies --------------------------------------------------------------------


def accuracy_clean(net, data: Dataset) -> float:
    if len(data) == 0:
        raise InputError("empty dataset")
    return float(np.mean(np.argmax(nn.forward(net, data.X), axis=1) == data.y))


def _check_u(cache, u):
    if u is not None and u.K != cache.K:
        raise InputError("utility K does not match the data")


def correct_counts(cache: AttackCache, kind: str, u: UtilityMatrix | None = None) -> np.ndarray:
    """Per-class count of examples still correctly classified after the attack."""
    _check_u(cache, u)
    out = np.zeros(cache.K, dtype=int)
    for c in range(cache.K):
        if kind == "clean":
            p = cache.clean_pred[cache.class_idx[c]]
        elif kind == "adversarial":
            p = cache.adversarial(c)
        elif kind == "strategic":
            p = cache.strategic(c, targets_of(u, c))
        elif kind == "sequential":
            p = cache.sequential(c, u)
        else:
            raise InputError(f"unknown attack kind {kind!r}")
        out[c] = cache.correct(c, p)
    return out


def accuracy_under(net, data, kind, spec=None, u=None, cache: AttackCache | None = None) -> float:
    """Fraction still correct after the attack (``kind``: clean, adversarial, strategic, sequential).

    Rows with no positive-utility target are left unattacked.
    """
    if len(data) == 0:
        raise InputError("empty dataset")
    cache = cache or AttackCache(net, data, spec)
    return correct_counts(cache, kind, u).sum() / len(data)


@dataclass
class TargetAccuracyTable:
    values: np.ndarray  # (K, K); diagonal is clean per-class accuracy
    counts: np.ndarray  # (K, K) correct counts
    class_sizes: np.ndarray

    @property
    def K(self):
        return len(self.class_sizes)

    def class_freqs(self):
        return self.class_sizes / self.class_sizes.sum()

    def one_hot_accuracy(self, targets) -> float:
        """Accuracy against the 1-hot opponent ``y -> targets[y]``, composed row by row."""
        return float(sum(self.counts[y, t] for y, t in enumerate(targets)) / self.class_sizes.sum())


def target_accuracy_table(net, data, spec=None, cache: AttackCache | None = None) -> TargetAccuracyTable:
    cache = cache or AttackCache(net, data, spec)
    K = cache.K
    counts = np.zeros((K, K), dtype=int)
    for y in range(K):
        for t in range(K):
            p = cache.clean_pred[cache.class_idx[y]] if t == y else cache.strategic(y, (t,))
            counts[y, t] = cache.correct(y, p)
    sizes = np.array([len(ix) for ix in cache.class_idx])
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(sizes[:, None] > 0, counts / np.maximum(sizes, 1)[:, None], 0.0)
    return TargetAccuracyTable(values, counts, sizes)


def _row_counts(cache, uset, c):
    cands = row_candidates(uset, c)
    return cands, [cache.correct(c, cache.strategic(c, T)) for T in cands]


def worst_case_accuracy(net, data, uset: UncertaintySet, spec=None, cache: AttackCache | None = None,
                        exclude: UtilityMatrix | None = None, enumerate_all=False):
    """Accuracy against the worst opponent in ``uset`` and that opponent's utility.

    Row-factorizable sets pick the worst candidate per class independently;
    explicit sets (or ``enumerate_all=True``) evaluate every member.
    ``exclude`` removes one utility from the set (used for misspecification).
    """
    cache = cache or AttackCache(net, data, spec)
    if uset.K != cache.K:
        raise InputError("uncertainty set K does not match the data")
    N = len(data)
    if enumerate_all or not uset.row_factorizable:
        best = None
        for m in enumerate_members(uset):
            if exclude is not None and m == exclude:
                continue
            n = int(correct_counts(cache, "strategic", m).sum())
            if best is None or n < best[0]:
                best = (n, m)
        if best is None:
            raise DomainError("uncertainty set is empty after exclusion")
        return best[0] / N, best[1]
    rows = [_row_counts(cache, uset, c) for c in range(cache.K)]
    choice = [int(np.argmin(cnt)) for _, cnt in rows]
    total = sum(cnt[j] for (_, cnt), j in zip(rows, choice))
    chosen = [cands[j] for (cands, _), j in zip(rows, choice)]
    if exclude is not None and all(
        tuple(sorted(T)) == tuple(sorted(targets_of(exclude, c))) for c, T in enumerate(chosen)
    ):
        # cheapest single-row deviation from the excluded opponent
        bump = None
        for c, (cands, cnt) in enumerate(rows):
            for j, n in enumerate(cnt):
                if j != choice[c] and (bump is None or n - cnt[choice[c]] < bump[0]):
                    bump = (n - cnt[choice[c]], c, j)
        if bump is None:
            raise DomainError("uncertainty set is empty after exclusion")
        total += bump[0]
        chosen[bump[1]] = rows[bump[1]][0][bump[2]]
    u = np.zeros((cache.K, cache.K))
    for c, T in enumerate(chosen):
        u[c, list(T)] = 1.0
    return total / N, UtilityMatrix(u)


def deflection_rate(strat_fstr: float, strat_fadv: float, clean_fcln: float) -> float:
    """Share of the attacks succeeding on the adversarial model that the strategic model stops."""
    denom = clean_fcln - strat_fadv
    if not denom > 0:
        raise DomainError("deflection undefined: clean accuracy must exceed the adversarial model's strategic accuracy")
    return (strat_fstr - strat_fadv) / denom


def attack_distribution(net, data, kind, spec=None, u=None, cache: AttackCache | None = None) -> np.ndarray:
    """K x K counts of (true label, post-attack prediction)."""
    cache = cache or AttackCache(net, data, spec)
    _check_u(cache, u)
    K = cache.K
    out = np.zeros((K, K), dtype=int)
    for c in range(K):
        if kind == "clean":
            p = cache.clean_pred[cache.class_idx[c]]
        elif kind == "adversarial":
            p = cache.adversarial(c)
        elif kind == "strategic":
            p = cache.strategic(c, targets_of(u, c))
        elif kind == "sequential":
            p = cache.sequential(c, u)
        else:
            raise InputError(f"unknown attack kind {kind!r}")
        out[c] = np.bincount(p, minlength=K)
    return out


# -- 1-hot landscape -------------------------------------------------------------------

MAX_LANDSCAPE_ENUM = 1_000_000


def one_hot_accuracies(table: TargetAccuracyTable, class_freqs=None, targets=None):
    """Analytic accuracy of 1-hot opponents; all of them when ``targets`` is None."""
    K = table.K
    w = table.class_freqs() if class_freqs is None else np.asarray(class_freqs, dtype=float)
    if targets is None:
        n = (K - 1) ** K
        if n > MAX_LANDSCAPE_ENUM:
            raise CapacityError(f"{n} 1-hot opponents exceed {MAX_LANDSCAPE_ENUM}")
        rows = [[t for t in range(K) if t != y] for y in range(K)]
        targets = np.array(list(itertools.product(*rows)), dtype=int)
    targets = np.asarray(targets, dtype=int)
    acc = (table.values[np.arange(K)[None, :], targets] * w[None, :]).sum(axis=1)
    return targets, acc


@dataclass
class OneHotLandscape:
    edges: np.ndarray
    histogram: np.ndarray  # opponents per bin (exact when enumerated)
    exact: bool
    samples: list  # per bin: list of (targets tuple, accuracy)
    easiest: tuple  # (targets, accuracy)
    hardest: tuple


def _bin_of(acc, edges):
    bins = len(edges) - 1
    if edges[-1] == edges[0]:
        return np.zeros(np.shape(acc), dtype=int)
    b = np.floor((np.asarray(acc) - edges[0]) / (edges[-1] - edges[0]) * bins).astype(int)
    return np.clip(b, 0, bins - 1)


def one_hot_landscape(table: TargetAccuracyTable, class_freqs=None, bins=10, per_bin=15, seed=0,
                      max_draws=200_000) -> OneHotLandscape:
    """Bin 1-hot opponents by analytic accuracy and sample ``per_bin`` from each bin.

    Bins are equal-width over [hardest, easiest]. Small K is enumerated exactly;
    otherwise the histogram is estimated from rejection sampling.
    """
    if bins < 1 or per_bin < 1:
        raise InputError("bins and per_bin must be >= 1")
    K = table.K
    w = table.class_freqs() if class_freqs is None else np.asarray(class_freqs, dtype=float)
    off = table.values + np.where(np.eye(K, dtype=bool), np.nan, 0.0)
    easy_t = tuple(int(t) for t in np.nanargmax(off, axis=1))
    hard_t = tuple(int(t) for t in np.nanargmin(off, axis=1))
    _, (hi,) = one_hot_accuracies(table, w, [easy_t])
    _, (lo,) = one_hot_accuracies(table, w, [hard_t])
    edges = np.linspace(lo, hi, bins + 1)
    rng = np.random.default_rng(seed)
    samples = [[] for _ in range(bins)]
    if (K - 1) ** K <= MAX_LANDSCAPE_ENUM:
        targets, acc = one_hot_accuracies(table, w)
        b = _bin_of(acc, edges)
        hist = np.bincount(b, minlength=bins)
        for k in range(bins):
            members = np.nonzero(b == k)[0]
            pick = rng.choice(members, size=min(per_bin, members.size), replace=False) if members.size else []
            samples[k] = [(tuple(int(t) for t in targets[i]), float(acc[i])) for i in sorted(pick)]
        exact = True
    else:
        hist = np.zeros(bins, dtype=int)
        draws = 0
        while draws < max_draws and any(len(s) < per_bin for s in samples):
            n = min(4096, max_draws - draws)
            t = rng.integers(K - 1, size=(n, K))
            t = t + (t >= np.arange(K)[None, :])  # skip the diagonal
            _, acc = one_hot_accuracies(table, w, t)
            b = _bin_of(acc, edges)
            hist += np.bincount(b, minlength=bins)
            for i in range(n):
                if len(samples[b[i]]) < per_bin:
                    samples[b[i]].append((tuple(int(v) for v in t[i]), float(acc[i])))
            draws += n
        exact = False
    return OneHotLandscape(edges, hist, exact, samples, (easy_t, float(hi)), (hard_t, float(lo)))


def semantic_pair_count(u: UtilityMatrix, partition: SemanticPartition) -> int:
    """Number of classes whose single target shares their semantic group."""
    vals = u.values
    if not (u.is_zero_one() and np.all(vals.sum(axis=1) == 1)):
        raise InputError("semantic_pair_count needs a 1-hot utility")
    targets = np.argmax(vals, axis=1)
    return int(sum(partition.group_of(y) == partition.group_of(int(t)) for y, t in enumerate(targets)))


def pearson_correlation(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise InputError("need two equal-length series of at least 2 values")
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(xc @ xc)), math.sqrt(float(yc @ yc))
    if sx == 0 or sy == 0:
        raise DomainError("correlation undefined for a constant series")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


# -- report ------------------------------------------------------------------------------


@dataclass
class EvalReport:
    clean_acc: float
    adv_acc: float | None = None
    strategic_accs: dict = field(default_factory=dict)
    worst_case_acc: float | None = None
    worst_case_utility: UtilityMatrix | None = None
    deflection: float | None = None
    attack_distribution: np.ndarray | None = None
    target_table: TargetAccuracyTable | None = None

    def to_dict(self) -> dict:
        return {
            "clean_acc": self.clean_acc,
            "adv_acc": self.adv_acc,
            "strategic_accs": dict(sorted(self.strategic_accs.items())),
            "worst_case_acc": self.worst_case_acc,
            "worst_case_utility": None if self.worst_case_utility is None
            else self.worst_case_utility.values.tolist(),
            "deflection": self.deflection,
            "attack_distribution": None if self.attack_distribution is None
            else self.attack_distribution.tolist(),
            "target_table": None if self.target_table is None else self.target_table.values.tolist(),
        }
