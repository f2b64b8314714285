"""Datasets: CSV ingestion, seeded batching, and a group-structured Gaussian generator."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .utilities import SemanticPartition


@dataclass
class Dataset:
    X: np.ndarray  # (N, d) float64
    y: np.ndarray  # (N,) int
    K: int
    partition: SemanticPartition | None = None
    bounds: tuple | None = None  # (lo, hi) feature bounds, optional

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise DataError("features must be (N, d) with one label per row")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.K):
            raise DataError(f"labels must lie in [0, {self.K})")
        if self.partition is not None and self.partition.K != self.K:
            raise DataError("partition does not cover K classes")

    def __len__(self):
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.K, self.partition, self.bounds)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.K)

    def require_training_ready(self):
        if len(self) == 0:
            raise DataError("empty dataset")
        missing = np.nonzero(self.class_counts() == 0)[0]
        if missing.size:
            raise DataError(f"no training examples for classes {missing.tolist()}")

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.K == other.K
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)
                and self.partition == other.partition)


def save_csv(dataset: Dataset, path, partition_path=None) -> None:
    header = ",".join([f"f{j}" for j in range(dataset.d)] + ["label"])
    lines = [header]
    for x, y in zip(dataset.X, dataset.y):
        lines.append(",".join(format(v, ".17g") for v in x) + f",{int(y)}")
    Path(path).write_text("\n".join(lines) + "\n")
    if partition_path is not None and dataset.partition is not None:
        dataset.partition.save(partition_path)


def load_csv(path, num_classes=None, partition_path=None) -> Dataset:
    """Read ``f0,...,f{d-1},label`` rows.

    K comes from the partition sidecar, else ``num_classes``, else the largest
    label + 1.
    """
    partition = SemanticPartition.load(partition_path) if partition_path else None
    K = partition.K if partition is not None else num_classes
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataError("missing header", line=1)
    header = lines[0].strip().split(",")
    d = len(header) - 1
    if d < 1 or header[-1] != "label" or header[:-1] != [f"f{j}" for j in range(d)]:
        raise DataError("header must be f0,...,f{d-1},label", line=1)
    X, Y = [], []
    for i, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != d + 1:
            raise DataError(f"expected {d + 1} fields, found {len(parts)}", line=i)
        try:
            X.append([float(v) for v in parts[:-1]])
        except ValueError:
            raise DataError("non-numeric feature", line=i) from None
        try:
            label = int(parts[-1])
        except ValueError:
            raise DataError("label must be an integer", line=i) from None
        if label < 0 or (K is not None and label >= K):
            raise DataError(f"label {label} out of range for K={K}", line=i)
        Y.append(label)
    if not Y:
        raise DataError("dataset has no examples")
    if K is None:
        K = max(Y) + 1
    return Dataset(np.array(X), np.array(Y), K, partition)


def batch_iter(dataset: Dataset, batch_size: int, shuffle_seed):
    """Yield index arrays covering a seeded permutation once; the last batch may be short."""
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    perm = np.random.default_rng(shuffle_seed).permutation(len(dataset))
    for start in range(0, len(perm), batch_size):
        yield perm[start:start + batch_size]


def train_test_split(dataset: Dataset, test_fraction=0.2, seed=0):
    """Stratified seeded split."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(dataset.K):
        idx = np.nonzero(dataset.y == c)[0]
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return dataset.subset(np.sort(train)), dataset.subset(np.sort(test))


def simplex_vertices(m: int, side: float) -> np.ndarray:
    """``m`` points in R^(m-1), centred at the origin, all pairwise ``side`` apart."""
    if m == 1:
        return np.zeros((1, 0))
    # orthonormal basis of the sum-zero subspace of R^m
    q, _ = np.linalg.qr(np.eye(m) - 1.0 / m)
    basis = q[:, : m - 1]
    centred = np.eye(m) - 1.0 / m
    return centred @ basis * (side / np.sqrt(2.0))


def class_means(partition: SemanticPartition, d: int, intra_sep: float, inter_sep: float) -> np.ndarray:
    """Class means with same-group pairs ``intra_sep`` and cross-group pairs ``inter_sep`` apart.

    Group centroids sit on a simplex; each group's classes sit on a sub-simplex
    in its own orthogonal block, so every cross-group distance is identical.
    When ``d`` is too small for separate blocks, the sub-simplices share one
    block and cross-group distances become ``>= inter_sep`` instead.
    """
    groups = partition.group_ids()
    members = [[c for c in range(partition.K) if partition.groups[c] == g] for g in groups]
    G = len(groups)
    exact = (G - 1) + sum(len(m) - 1 for m in members)
    shared = (G - 1) + max(len(m) - 1 for m in members)
    if shared > d:
        raise ConfigError(f"geometry needs {shared} dimensions but d={d}")
    if exact > d:
        centroids = simplex_vertices(G, inter_sep)
        means = np.zeros((partition.K, d))
        for gi, m in enumerate(members):
            sub = simplex_vertices(len(m), intra_sep)
            for j, c in enumerate(m):
                means[c, : G - 1] = centroids[gi]
                means[c, G - 1: G - 1 + len(m) - 1] = sub[j]
        return means
    # circumradius of each sub-simplex
    radii = [intra_sep * np.sqrt((len(m) - 1) / (2.0 * len(m))) for m in members]
    if G > 1:
        # need |c_a - c_b|^2 = inter^2 - R_a^2 - R_b^2; classical MDS on that matrix
        R2 = np.array(radii) ** 2
        J = np.eye(G) - 1.0 / G
        gram = J @ (np.diag(inter_sep ** 2 / 2.0 - R2)) @ J
        w, V = np.linalg.eigh(gram)
        if w.min() < -1e-9 or inter_sep ** 2 <= 2 * R2.max():
            raise ConfigError("inter_sep too small for the requested intra_sep")
        keep = np.argsort(w)[::-1][: G - 1]
        centroids = V[:, keep] * np.sqrt(np.clip(w[keep], 0.0, None))
    else:
        centroids = np.zeros((1, 0))
    means = np.zeros((partition.K, d))
    col = G - 1
    for gi, m in enumerate(members):
        sub = simplex_vertices(len(m), intra_sep)
        for j, c in enumerate(m):
            means[c, : G - 1] = centroids[gi]
            means[c, col: col + len(m) - 1] = sub[j]
        col += len(m) - 1
    return means


def synth_gaussian_groups(K, d, partition, intra_sep, inter_sep, n_per_class, noise_sd, seed) -> Dataset:
    if d < 2:
        raise ConfigError("d must be at least 2")
    if partition.K != K:
        raise ConfigError("partition must cover exactly K classes")
    means = class_means(partition, d, intra_sep, inter_sep)
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(K), n_per_class)
    X = means[y] + noise_sd * rng.standard_normal((len(y), d))
    return Dataset(X, y, K, partition)
