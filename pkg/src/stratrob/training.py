"""Minibatch trainers: clean, adversarial, strategic (single utility / uncertainty set),
epsilon-mixed, and sequential [0,1]-utility training.

Randomness is split into independent streams derived from ``cfg.seed``:
shuffling, attack random starts, response noise and the utility draw of mixed
training. Consequently any trainer run with a zero attack radius follows the
clean trajectory exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attacks, nn
from .attacks import AttackSpec
from .data import Dataset, batch_iter
from .errors import ConfigError, DataError
from .utilities import (
    UncertaintySet,
    UtilityMatrix,
    row_candidates,
    sample_member,
    worst_case_representative,
)

OBJECTIVES = ("clean", "adversarial", "strategic_single", "strategic_set", "mixed", "sequential")


@dataclass(frozen=True)
class Objective:
    kind: str = "clean"
    utility: UtilityMatrix | None = None
    uset: UncertaintySet | None = None
    eps: float = 0.0  # risk-mitigation mass for "mixed"
    fallback: bool = False  # adversarial fallback for "sequential"

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.kind!r}")
        if self.kind in ("strategic_single", "mixed", "sequential") and self.utility is None:
            raise ConfigError(f"objective {self.kind} needs a utility")
        if self.kind in ("strategic_set", "mixed") and self.uset is None:
            raise ConfigError(f"objective {self.kind} needs an uncertainty set")
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError("eps must lie in [0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    base_lr: float = 0.01
    momentum: float = 0.9
    lr_drop_epochs: tuple = ()
    attack: AttackSpec = field(default_factory=lambda: attacks.PRESETS["paper-train"])
    objective: Objective = field(default_factory=Objective)
    seed: int = 0
    noise_eps: float | None = None  # None -> 0.1, or 0.5 for preference sets

    def __post_init__(self):
        object.__setattr__(self, "lr_drop_epochs", tuple(int(e) for e in self.lr_drop_epochs))
        drops = self.lr_drop_epochs
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if any(b <= a for a, b in zip(drops, drops[1:])) or any(e < 0 or e >= max(self.epochs, 1) for e in drops):
            raise ConfigError("lr_drop_epochs must be strictly increasing and < epochs")
        if self.base_lr <= 0 or not 0.0 <= self.momentum < 1.0:
            raise ConfigError("need base_lr > 0 and momentum in [0, 1)")
        if self.noise_eps is not None and not 0.0 <= self.noise_eps <= 1.0:
            raise ConfigError("noise_eps must lie in [0, 1]")

    @property
    def effective_noise_eps(self) -> float:
        if self.noise_eps is not None:
            return self.noise_eps
        uset = self.objective.uset
        if self.objective.kind == "strategic_set" and uset is not None and uset.kind == "preference":
            return 0.5
        return 0.1

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for e in self.lr_drop_epochs if e <= epoch)
        return self.base_lr * 0.1 ** drops


@dataclass
class EpochStats:
    loss: float
    accuracy: float
    attack_success: float
    lr: float


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)
    path: str = ""  # which code path produced the attacks
    response_calls: int = 0  # strategic-response evaluations (candidate enumeration)
    noise_replacements: int = 0
    batches: int = 0
    mixed_draws: int = 0  # batches whose utility was redrawn from the set
    selections: list = field(default_factory=list)  # optional per-batch candidate bookkeeping

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "response_calls": self.response_calls,
            "noise_replacements": self.noise_replacements,
            "batches": self.batches,
            "mixed_draws": self.mixed_draws,
            "epochs": [vars(e) for e in self.epochs],
        }


class _Streams:
    def __init__(self, seed):
        ss = np.random.SeedSequence(int(seed))
        shuffle, attack, noise, mix = ss.spawn(4)
        self.shuffle_seq = shuffle
        self.attack = np.random.default_rng(attack)  # one attack seed per batch
        self.noise = np.random.default_rng(noise)  # response-noise draws
        self.mix = np.random.default_rng(mix)  # per-batch utility draws

    def epoch_shuffle_seed(self, epoch):
        return np.random.SeedSequence(self.shuffle_seq.entropy, spawn_key=(0, epoch))


def _check(net: nn.DenseNet, data: Dataset, cfg: TrainConfig):
    data.require_training_ready()
    if data.d != net.input_dim or data.K != net.num_classes:
        raise DataError("network and dataset disagree on d or K")
    u = cfg.objective.utility
    if u is not None and u.K != data.K:
        raise ConfigError("utility K does not match the data")
    if cfg.objective.uset is not None and cfg.objective.uset.K != data.K:
        raise ConfigError("uncertainty set K does not match the data")


def _fit(net0, data, cfg, make_inputs, log):
    """Shared loop: ``make_inputs(net, X, y, streams, log) -> (X_fed, success bits)``."""
    _check(net0, data, cfg)
    net = net0.copy()
    streams = _Streams(cfg.seed)
    state = nn.SGDState()
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        tot_loss = tot_correct = tot_success = 0.0
        for idx in batch_iter(data, cfg.batch_size, streams.epoch_shuffle_seed(epoch)):
            X, y = data.X[idx], data.y[idx]
            X_fed, success = make_inputs(net, X, y, streams, log)
            loss, grads = nn.backward(net, X_fed, y)
            tot_loss += loss * len(y)
            tot_correct += float(np.sum(np.argmax(nn.forward(net, X_fed), axis=1) == y))
            tot_success += float(np.sum(success))
            nn.sgd_step(net, grads, lr, cfg.momentum, state)
            log.batches += 1
        n = len(data)
        log.epochs.append(EpochStats(tot_loss / n, tot_correct / n, tot_success / n, lr))
    return net, log


def _batch_spec(cfg, streams) -> AttackSpec:
    return cfg.attack.with_seed(int(streams.attack.integers(2 ** 31)))


def _strategic_inputs(u_of_batch):
    """Inputs for single-utility training, with per-example response noise."""

    def make(net, X, y, streams, log, cfg):
        u = u_of_batch(streams, log)
        mask = u.values[y] > 0
        attackable = mask.any(axis=1)
        X_fed = X.copy()
        success = np.zeros(len(y))
        spec = _batch_spec(cfg, streams)
        idx = np.nonzero(attackable)[0]
        if idx.size:
            b, replaced = attacks.noisy_response_batch(
                net, X[idx], y[idx], mask[idx], cfg.effective_noise_eps, spec, streams.noise)
            X_fed[idx] = X[idx] + b.delta
            success[idx] = b.success
            log.noise_replacements += int(replaced.sum())
        return X_fed, success

    return make


def train_clean(net0, data, cfg: TrainConfig):
    log = TrainLog(path="clean")
    return _fit(net0, data, cfg, lambda net, X, y, s, lg: (X, np.zeros(len(y))), log)


def train_adversarial(net0, data, cfg: TrainConfig):
    log = TrainLog(path="adversarial")

    def make(net, X, y, streams, lg):
        b = attacks.pgd_untargeted_batch(net, X, y, _batch_spec(cfg, streams))
        return X + b.delta, b.success

    return _fit(net0, data, cfg, make, log)


def train_strategic_single(net0, data, cfg: TrainConfig, utility=None, log=None):
    u = utility if utility is not None else cfg.objective.utility
    if u is None:
        raise ConfigError("strategic training needs a utility")
    if u.K != data.K:
        raise ConfigError("utility K does not match the data")
    log = log or TrainLog(path="strategic_single")
    make = _strategic_inputs(lambda streams, lg: u)
    return _fit(net0, data, cfg, lambda *a: make(*a, cfg), log)


def select_worst_candidates(net, X, y, uset: UncertaintySet, spec: AttackSpec, penalized=False):
    """Per example, attack with every row candidate and keep the one with the largest
    learner loss (cross-entropy at the true label; first candidate wins ties).

    Returns ``(X_attacked, success, losses, chosen, calls)`` where ``losses[i]``
    lists the loss under each candidate of example i's row.
    """
    X_out = X.copy()
    success = np.zeros(len(y))
    losses = [None] * len(y)
    chosen = np.zeros(len(y), dtype=int)
    calls = 0
    for c in np.unique(y):
        idx = np.nonzero(y == c)[0]
        cands = row_candidates(uset, int(c))
        per = np.empty((idx.size, len(cands)))
        deltas = np.zeros((len(cands), idx.size, X.shape[1]))
        hits = np.zeros((len(cands), idx.size))
        for j, T in enumerate(cands):
            if T:
                b = attacks.multi_target_batch(net, X[idx], [T] * idx.size, spec, penalized=penalized)
                deltas[j], hits[j] = b.delta, b.success
                calls += idx.size
            per[:, j] = nn.cross_entropy(nn.forward(net, X[idx] + deltas[j]), np.full(idx.size, c))
        best = np.argmax(per, axis=1)
        chosen[idx] = best
        X_out[idx] = X[idx] + deltas[best, np.arange(idx.size)]
        success[idx] = hits[best, np.arange(idx.size)]
        for k, i in enumerate(idx):
            losses[i] = per[k]
    return X_out, success, losses, chosen, calls


def train_strategic_set(net0, data, cfg: TrainConfig, uset=None, record_selections=False):
    U = uset if uset is not None else cfg.objective.uset
    if U is None:
        raise ConfigError("set training needs an uncertainty set")
    rep = worst_case_representative(U)
    if rep is not None:
        log = TrainLog(path=f"representative:{U.describe()}")
        make = _strategic_inputs(lambda streams, lg: rep)

        def counted(net, X, y, streams, lg):
            lg.response_calls += int(np.sum((rep.values[y] > 0).any(axis=1)))
            return make(net, X, y, streams, lg, cfg)

        return _fit(net0, data, cfg, counted, log)

    log = TrainLog(path=f"enumerate:{U.describe()}")
    penalized = U.kind == "preference"
    for c in range(U.K):
        row_candidates(U, c)  # surface capacity errors before training

    def make(net, X, y, streams, lg):
        spec = _batch_spec(cfg, streams)
        X_fed, success, losses, chosen, calls = select_worst_candidates(net, X, y, U, spec, penalized)
        lg.response_calls += calls
        if record_selections:
            lg.selections.append((losses, chosen))
        attackable = np.array([any(row_candidates(U, int(c))) for c in y])
        replaced = (streams.noise.random(len(y)) < cfg.effective_noise_eps) & attackable
        rand_t = streams.noise.integers(U.K, size=len(y))
        idx = np.nonzero(replaced)[0]
        if idx.size:
            b = attacks.pgd_targeted_batch(net, X[idx], rand_t[idx], spec)
            X_fed[idx] = X[idx] + b.delta
            lg.noise_replacements += int(idx.size)
        return X_fed, success

    return _fit(net0, data, cfg, make, log)


def draw_batch_utility(u: UtilityMatrix, uset: UncertaintySet, eps: float, rng):
    """``u`` with probability 1 - eps, otherwise a uniform member of ``uset``."""
    if rng.random() < eps:
        return sample_member(uset, rng), True
    return u, False


def train_mixed(net0, data, cfg: TrainConfig):
    obj = cfg.objective
    log = TrainLog(path=f"mixed:{obj.uset.describe()}")

    def u_of_batch(streams, lg):
        u, replaced = draw_batch_utility(obj.utility, obj.uset, obj.eps, streams.mix)
        lg.mixed_draws += int(replaced)
        return u

    make = _strategic_inputs(u_of_batch)
    return _fit(net0, data, cfg, lambda *a: make(*a, cfg), log)


def sequential_inputs(net, X, y, u: UtilityMatrix, spec: AttackSpec, fallback=False):
    """Attacked inputs for sequential training; with ``fallback`` rows whose
    positive targets all fail get an untargeted attack instead."""
    b = attacks.sequential_batch(net, X, y, u, spec)
    delta = b.delta
    if fallback:
        failed = np.nonzero((u.values[y] > 0).any(axis=1) & ~b.success)[0]
        if failed.size:
            adv = attacks.pgd_untargeted_batch(net, X[failed], y[failed], spec)
            delta = delta.copy()
            delta[failed] = adv.delta
    return X + delta, b.success


def train_sequential(net0, data, cfg: TrainConfig):
    u = cfg.objective.utility
    fallback = cfg.objective.fallback
    log = TrainLog(path="sequential+fallback" if fallback else "sequential")

    def make(net, X, y, streams, lg):
        return sequential_inputs(net, X, y, u, _batch_spec(cfg, streams), fallback)

    return _fit(net0, data, cfg, make, log)


def train(net0, data, cfg: TrainConfig):
    kind = cfg.objective.kind
    if kind == "clean":
        return train_clean(net0, data, cfg)
    if kind == "adversarial":
        return train_adversarial(net0, data, cfg)
    if kind == "strategic_single":
        return train_strategic_single(net0, data, cfg)
    if kind == "strategic_set":
        return train_strategic_set(net0, data, cfg)
    if kind == "mixed":
        return train_mixed(net0, data, cfg)
    return train_sequential(net0, data, cfg)
