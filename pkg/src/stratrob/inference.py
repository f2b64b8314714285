"""Recover an opponent's targets and utility support from logged attacks."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import attacks
from .attacks import AttackSpec
from .data import Dataset
from .errors import DataError, InputError
from .utilities import UtilityMatrix, targets_of

MODES = ("pred", "delta")


@dataclass
class AttackLog:
    X: np.ndarray  # (N, d) clean inputs
    y: np.ndarray  # (N,) true labels
    mode: str
    observed: np.ndarray  # (N,) post-attack predictions or (N, d) attack vectors
    radius: float
    K: int
    net: object = None  # the model the attacks were mounted against

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=int)
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        self.observed = np.asarray(self.observed, dtype=int if self.mode == "pred" else np.float64)
        N = len(self.y)
        if self.X.ndim != 2 or self.X.shape[0] != N:
            raise InputError("X must be (N, d) with one label per record")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.K):
            raise InputError("label out of range")
        if self.mode == "pred":
            if self.observed.shape != (N,):
                raise InputError("pred logs need one prediction per record")
            if self.observed.size and (self.observed.min() < 0 or self.observed.max() >= self.K):
                raise InputError("prediction out of range")
        else:
            if self.observed.shape != self.X.shape:
                raise InputError("delta logs need one d-vector per record")
            if np.any(np.abs(self.observed) > self.radius * (1 + 1e-12)):
                raise InputError("attack vector exceeds the declared radius")

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return len(self.y)

    def to_text(self) -> str:
        lines = [f"d={self.d},K={self.K},radius={self.radius!r},mode={self.mode}"]
        for i in range(len(self)):
            feats = [format(v, ".17g") for v in self.X[i]]
            obs = ([str(int(self.observed[i]))] if self.mode == "pred"
                   else [format(v, ".17g") for v in self.observed[i]])
            lines.append(",".join(feats + [str(int(self.y[i]))] + obs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AttackLog":
        lines = text.splitlines()
        if not lines:
            raise DataError("missing header", line=1)
        try:
            head = dict(kv.split("=", 1) for kv in lines[0].strip().split(","))
            d, K, radius, mode = int(head["d"]), int(head["K"]), float(head["radius"]), head["mode"]
        except (KeyError, ValueError):
            raise DataError("header must be d=<int>,K=<int>,radius=<float>,mode=<pred|delta>", line=1) from None
        if mode not in MODES:
            raise DataError(f"unknown mode {mode!r}", line=1)
        width = d + 1 + (1 if mode == "pred" else d)
        X, Y, O = [], [], []
        for i, ln in enumerate(lines[1:], start=2):
            if not ln.strip():
                continue
            parts = ln.split(",")
            if len(parts) != width:
                raise DataError(f"expected {width} fields, found {len(parts)}", line=i)
            try:
                X.append([float(v) for v in parts[:d]])
                Y.append(int(parts[d]))
                O.append(int(parts[d + 1]) if mode == "pred" else [float(v) for v in parts[d + 1:]])
            except ValueError:
                raise DataError("malformed record", line=i) from None
        try:
            return cls(np.array(X).reshape(len(Y), d), np.array(Y, dtype=int), mode,
                       np.array(O).reshape((len(Y),) if mode == "pred" else (len(Y), d)), radius, K)
        except InputError as exc:
            raise DataError(str(exc)) from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, net=None) -> "AttackLog":
        log = cls.from_text(Path(path).read_text())
        log.net = net
        return log


def generate_attack_log(net, data: Dataset, u: UtilityMatrix, spec: AttackSpec, mode="delta"):
    """Attack every example with a positive-utility target via the multi-target
    response on its target set; rows without targets are not logged.

    Returns the log and the per-record true target sets.
    """
    if u.K != data.K:
        raise InputError("utility K does not match the data")
    keep = np.array([bool(targets_of(u, int(c))) for c in data.y], dtype=bool)
    X, y = data.X[keep], data.y[keep]
    sets = [targets_of(u, int(c)) for c in y]
    if len(y):
        b = attacks.multi_target_batch(net, X, sets, spec)
        delta, pred = b.delta, b.predicted
    else:
        delta, pred = np.zeros((0, data.d)), np.zeros(0, dtype=int)
    observed = pred if mode == "pred" else delta
    return AttackLog(X, y, mode, observed, spec.radius, data.K, net), sets


def infer_targets_predictions(log: AttackLog) -> list:
    """The post-attack prediction, or None where it equals the true label."""
    if log.mode != "pred":
        raise InputError("prediction-based inference needs a pred log")
    return [None if int(p) == int(c) else int(p) for p, c in zip(log.observed, log.y)]


def infer_targets_vectors(log: AttackLog, spec: AttackSpec, net=None) -> list:
    """Nearest simulated targeted attack in L2; lower class index wins ties."""
    if log.mode != "delta":
        raise InputError("vector-based inference needs attack vectors")
    net = net if net is not None else log.net
    if net is None:
        raise InputError("vector-based inference needs the attacked network")
    if spec.radius != log.radius:
        raise InputError(f"attack radius {spec.radius!r} differs from the log's {log.radius!r}")
    spec = replace(spec, random_start=False)
    N, K = len(log), log.K
    if N == 0:
        return []
    dist = np.full((N, K), np.inf)
    for t in range(K):
        rows = np.nonzero(log.y != t)[0]
        if rows.size:
            b = attacks.pgd_targeted_batch(net, log.X[rows], t, spec)
            dist[rows, t] = np.linalg.norm(b.delta - log.observed[rows], axis=1)
    return [int(t) for t in np.argmin(dist, axis=1)]


def reconstruct_matrix(inferred, labels, K: int, k: int) -> UtilityMatrix:
    """Per source class, ones at the ``k`` most frequent inferred targets.

    Only observed targets are eligible, so rows may carry fewer than ``k``
    ones; frequency ties go to the lower class index.
    """
    if not 1 <= k <= K - 1:
        raise InputError("k must lie in [1, K-1]")
    counts = np.zeros((K, K), dtype=int)
    for t, c in zip(inferred, labels):
        if t is not None and int(t) != int(c):
            counts[int(c), int(t)] += 1
    u = np.zeros((K, K))
    for c in range(K):
        order = sorted((t for t in range(K) if counts[c, t] > 0), key=lambda t: (-counts[c, t], t))
        u[c, order[:k]] = 1.0
    return UtilityMatrix(u)


def inference_metrics(inferred, truth_targets, reconstructed: UtilityMatrix, truth: UtilityMatrix):
    """(target accuracy, fraction of off-diagonal entries recovered).

    Target accuracy counts a record as correct when its inferred target is in
    its true target set; records with no inference are left out (None if none remain).
    Entry recovery compares supports, so agreeing zeros count too.
    """
    if len(inferred) != len(truth_targets):
        raise InputError("one truth target set per record is required")
    if reconstructed.K != truth.K:
        raise InputError("matrix sizes differ")
    scored = [(t, T) for t, T in zip(inferred, truth_targets) if t is not None]
    acc = None if not scored else sum(int(t) in set(T) for t, T in scored) / len(scored)
    K = truth.K
    off = ~np.eye(K, dtype=bool)
    agree = (reconstructed.values > 0) == (truth.values > 0)
    return acc, float(agree[off].mean())
