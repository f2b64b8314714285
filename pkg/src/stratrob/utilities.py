"""Opponent utility matrices, semantic partitions and incentive uncertainty sets."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapacityError, DataError, InputError

MAX_ENUM_K = 12
MAX_ENUM_CANDIDATES = 10_000


class UtilityMatrix:
    """K x K payoff over (true label, predicted label) with a zero diagonal.

    Immutable: the backing array is flagged read-only.
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        v = np.array(values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise InputError(f"utility must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise InputError("utility entries must lie in [0, 1]")
        if np.any(np.diag(v) != 0.0):
            raise InputError("utility diagonal must be exactly 0")
        v.flags.writeable = False
        self._values = v

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def K(self) -> int:
        return self._values.shape[0]

    def row(self, y: int) -> np.ndarray:
        return self._values[y]

    def is_zero_one(self) -> bool:
        return bool(np.all((self._values == 0.0) | (self._values == 1.0)))

    def support(self) -> "UtilityMatrix":
        """0-1 matrix with ones wherever this utility is strictly positive."""
        return UtilityMatrix((self._values > 0).astype(np.float64))

    def __eq__(self, other):
        return isinstance(other, UtilityMatrix) and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self):
        return f"UtilityMatrix(K={self.K}, rows={self._values.tolist()})"

    def to_text(self) -> str:
        lines = [f"K={self.K}"]
        for row in self._values:
            lines.append(" ".join(format(v, ".17g") for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "UtilityMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("K="):
            raise DataError("utility file must start with 'K=<int>'", line=1)
        try:
            K = int(lines[0][2:])
        except ValueError:
            raise DataError("bad K header", line=1) from None
        if len(lines) != K + 1:
            raise DataError(f"expected {K} rows, found {len(lines) - 1}")
        rows = []
        for i, ln in enumerate(lines[1:], start=2):
            try:
                row = [float(t) for t in ln.split()]
            except ValueError:
                raise DataError("non-numeric utility entry", line=i) from None
            if len(row) != K:
                raise DataError(f"expected {K} entries", line=i)
            rows.append(row)
        try:
            return cls(rows)
        except InputError as exc:
            raise DataError(str(exc)) from exc

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "UtilityMatrix":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class SemanticPartition:
    groups: tuple  # group id per class index

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise InputError("partition must cover at least one class")

    @property
    def K(self) -> int:
        return len(self.groups)

    def group_of(self, y: int):
        return self.groups[y]

    def same_group(self, y: int) -> list[int]:
        """S(y): classes sharing y's group, y included."""
        g = self.groups[y]
        return [c for c in range(self.K) if self.groups[c] == g]

    def group_ids(self) -> list:
        seen = []
        for g in self.groups:
            if g not in seen:
                seen.append(g)
        return seen

    def to_text(self) -> str:
        return "".join(f"{c},{g}\n" for c, g in enumerate(self.groups))

    @classmethod
    def from_text(cls, text: str) -> "SemanticPartition":
        entries = {}
        for i, ln in enumerate(text.splitlines(), start=1):
            if not ln.strip():
                continue
            parts = ln.split(",")
            if len(parts) != 2:
                raise DataError("expected 'class_index,group_id'", line=i)
            try:
                c = int(parts[0])
            except ValueError:
                raise DataError("class index must be an integer", line=i) from None
            if c in entries:
                raise DataError(f"class {c} listed twice", line=i)
            entries[c] = parts[1].strip()
        if sorted(entries) != list(range(len(entries))):
            raise DataError("class indices must be exactly 0..K-1")
        groups = []
        for c in range(len(entries)):
            g = entries[c]
            groups.append(int(g) if g.lstrip("-").isdigit() else g)
        return cls(tuple(groups))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "SemanticPartition":
        return cls.from_text(Path(path).read_text())


# -- constructors -------------------------------------------------------------


def zero_utility(K: int) -> UtilityMatrix:
    return UtilityMatrix(np.zeros((K, K)))


def adversarial_utility(K: int) -> UtilityMatrix:
    if K < 2:
        raise InputError("adversarial utility needs K >= 2")
    return UtilityMatrix(1.0 - np.eye(K))


def k_hot_random(K: int, k: int, seed) -> UtilityMatrix:
    if not 1 <= k <= K - 1:
        raise InputError(f"k must be in [1, {K - 1}]")
    rng = np.random.default_rng(seed)
    u = np.zeros((K, K))
    for y in range(K):
        others = [c for c in range(K) if c != y]
        u[y, rng.choice(others, size=k, replace=False)] = 1.0
    return UtilityMatrix(u)


def one_hot_utility(targets: Sequence[int]) -> UtilityMatrix:
    """1-hot utility mapping class ``y`` to ``targets[y]``."""
    K = len(targets)
    u = np.zeros((K, K))
    for y, t in enumerate(targets):
        if t == y or not 0 <= t < K:
            raise InputError(f"invalid target {t} for class {y}")
        u[y, t] = 1.0
    return UtilityMatrix(u)


def semantic_representative(partition: SemanticPartition) -> UtilityMatrix:
    g = np.array([partition.group_ids().index(x) for x in partition.groups])
    u = (g[:, None] == g[None, :]).astype(np.float64)
    np.fill_diagonal(u, 0.0)
    return UtilityMatrix(u)


def anti_semantic_representative(partition: SemanticPartition) -> UtilityMatrix:
    g = np.array([partition.group_ids().index(x) for x in partition.groups])
    return UtilityMatrix((g[:, None] != g[None, :]).astype(np.float64))


def _check_ordering(ordering, K=None):
    ordering = tuple(int(c) for c in ordering)
    if sorted(ordering) != list(range(len(ordering))) or (K is not None and len(ordering) != K):
        raise InputError(f"{ordering} is not a permutation of [K]")
    return ordering


def preference_utility(ordering: Sequence[int]) -> UtilityMatrix:
    """``u(y, y') = 1`` iff ``y'`` ranks strictly above ``y``.

    ``ordering`` lists classes from least to most preferred.
    """
    ordering = _check_ordering(ordering)
    K = len(ordering)
    rank = np.empty(K, dtype=int)
    rank[list(ordering)] = np.arange(K)
    return UtilityMatrix((rank[None, :] > rank[:, None]).astype(np.float64))


def random_orderings(K: int, n: int, seed) -> list[tuple]:
    rng = np.random.default_rng(seed)
    return [tuple(int(c) for c in rng.permutation(K)) for _ in range(n)]


# -- relations ---------------------------------------------------------------


def dominates(a: UtilityMatrix, b: UtilityMatrix) -> bool:
    """True iff ``a <= b`` elementwise (every attack ``a`` values, ``b`` values at least as much)."""
    if a.K != b.K:
        raise InputError("K mismatch")
    return bool(np.all(a.values <= b.values))


def targets_of(u: UtilityMatrix, y: int) -> tuple:
    """Strictly positive targets of row ``y``, by decreasing utility then class index."""
    if not 0 <= y < u.K:
        raise InputError(f"class {y} out of range")
    row = u.row(y)
    pos = [c for c in range(u.K) if row[c] > 0]
    return tuple(sorted(pos, key=lambda c: (-row[c], c)))


# -- uncertainty sets ----------------------------------------------------------

SET_KINDS = ("singleton", "explicit", "all_k_hot", "semantic", "anti_semantic", "preference")
ROW_FACTORIZABLE = ("singleton", "all_k_hot", "semantic", "anti_semantic", "preference")


@dataclass(frozen=True)
class UncertaintySet:
    kind: str
    K: int
    members: tuple = ()  # UtilityMatrix items for singleton / explicit
    k: int = 0
    partition: SemanticPartition | None = None
    orderings: tuple = ()

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise InputError(f"unknown uncertainty set kind {self.kind!r}")
        if self.kind in ("singleton", "explicit"):
            if not self.members:
                raise InputError("explicit sets must be non-empty")
            if self.kind == "singleton" and len(self.members) != 1:
                raise InputError("singleton set holds exactly one utility")
            if any(m.K != self.K for m in self.members):
                raise InputError("all members must share K")
        elif self.kind == "all_k_hot":
            if not 1 <= self.k <= self.K - 1:
                raise InputError(f"k must be in [1, {self.K - 1}]")
        elif self.kind in ("semantic", "anti_semantic"):
            if self.partition is None or self.partition.K != self.K:
                raise InputError("partition must cover all K classes")
        elif self.kind == "preference":
            if not self.orderings:
                raise InputError("preference sets need at least one ordering")
            object.__setattr__(
                self, "orderings", tuple(_check_ordering(o, self.K) for o in self.orderings)
            )

    # constructors
    @classmethod
    def singleton(cls, u: UtilityMatrix):
        return cls("singleton", u.K, members=(u,))

    @classmethod
    def explicit(cls, members):
        members = tuple(members)
        if not members:
            raise InputError("explicit sets must be non-empty")
        return cls("explicit", members[0].K, members=members)

    @classmethod
    def all_k_hot(cls, K: int, k: int):
        return cls("all_k_hot", K, k=k)

    @classmethod
    def semantic(cls, partition: SemanticPartition):
        return cls("semantic", partition.K, partition=partition)

    @classmethod
    def anti_semantic(cls, partition: SemanticPartition):
        return cls("anti_semantic", partition.K, partition=partition)

    @classmethod
    def preference(cls, orderings):
        orderings = tuple(tuple(o) for o in orderings)
        if not orderings:
            raise InputError("preference sets need at least one ordering")
        return cls("preference", len(orderings[0]), orderings=orderings)

    @property
    def row_factorizable(self) -> bool:
        return self.kind in ROW_FACTORIZABLE

    def describe(self) -> str:
        if self.kind == "all_k_hot":
            return f"all_k_hot({self.k})"
        if self.kind in ("explicit", "preference"):
            n = len(self.members) if self.kind == "explicit" else len(self.orderings)
            return f"{self.kind}[{n}]"
        return self.kind


def _dedup(seq):
    out = []
    for item in seq:
        if item not in out:
            out.append(item)
    return out


def row_candidates(uset: UncertaintySet, y: int) -> list[tuple]:
    """Distinct target-sets row ``y`` can take across the set (attacks decouple over rows)."""
    K = uset.K
    if not 0 <= y < K:
        raise InputError(f"class {y} out of range")
    if uset.kind == "all_k_hot":
        n = math.comb(K - 1, uset.k)
        if K > MAX_ENUM_K or n > MAX_ENUM_CANDIDATES:
            raise CapacityError(f"all_k_hot({uset.k}) with K={K} has {n} rows per class; sample instead")
        others = [c for c in range(K) if c != y]
        return [tuple(c) for c in itertools.combinations(others, uset.k)]
    if uset.kind == "semantic":
        return [targets_of(semantic_representative(uset.partition), y)]
    if uset.kind == "anti_semantic":
        return [targets_of(anti_semantic_representative(uset.partition), y)]
    if uset.kind == "preference":
        return _dedup(targets_of(preference_utility(o), y) for o in uset.orderings)
    return _dedup(targets_of(m, y) for m in uset.members)


def worst_case_representative(uset: UncertaintySet) -> UtilityMatrix | None:
    """The elementwise-maximal utility whose downward closure covers the set, if one exists."""
    if uset.kind == "singleton":
        return uset.members[0]
    if uset.kind == "semantic":
        return semantic_representative(uset.partition)
    if uset.kind == "anti_semantic":
        return anti_semantic_representative(uset.partition)
    if uset.kind == "all_k_hot" and uset.k == uset.K - 1:
        return adversarial_utility(uset.K)
    if uset.kind == "preference" and len(set(uset.orderings)) == 1:
        return preference_utility(uset.orderings[0])
    return None


def enumerate_members(uset: UncertaintySet, limit: int = 1_000_000):
    """Every utility in the set as an explicit list (small sets only)."""
    if uset.kind in ("singleton", "explicit"):
        return list(uset.members)
    if uset.kind == "preference":
        return _dedup(preference_utility(o) for o in uset.orderings)
    if uset.kind == "all_k_hot":
        rows = [row_candidates(uset, y) for y in range(uset.K)]
        total = math.prod(len(r) for r in rows)
        if total > limit:
            raise CapacityError(f"{total} members exceed the enumeration limit {limit}")
        out = []
        for combo in itertools.product(*rows):
            u = np.zeros((uset.K, uset.K))
            for y, ts in enumerate(combo):
                u[y, list(ts)] = 1.0
            out.append(UtilityMatrix(u))
        return out
    # semantic / anti-semantic: every 0-1 matrix below the representative
    rep = worst_case_representative(uset)
    cells = list(zip(*np.nonzero(rep.values)))
    if 2 ** len(cells) > limit:
        raise CapacityError(f"2^{len(cells)} members exceed the enumeration limit {limit}")
    out = []
    for bits in itertools.product((0.0, 1.0), repeat=len(cells)):
        u = np.zeros((uset.K, uset.K))
        for (i, j), b in zip(cells, bits):
            u[i, j] = b
        out.append(UtilityMatrix(u))
    return out


def sample_member(uset: UncertaintySet, rng: np.random.Generator) -> UtilityMatrix:
    """Uniform draw from the set; rows are independent for the structured kinds."""
    K = uset.K
    if uset.kind in ("singleton", "explicit"):
        return uset.members[int(rng.integers(len(uset.members)))]
    if uset.kind == "preference":
        return preference_utility(uset.orderings[int(rng.integers(len(uset.orderings)))])
    if uset.kind == "all_k_hot":
        u = np.zeros((K, K))
        for y in range(K):
            others = [c for c in range(K) if c != y]
            u[y, rng.choice(others, size=uset.k, replace=False)] = 1.0
        return UtilityMatrix(u)
    rep = worst_case_representative(uset).values
    return UtilityMatrix(rep * (rng.random((K, K)) < 0.5))


def parse_utility(spec: str, K: int | None = None, partition: SemanticPartition | None = None,
                  base_dir=None) -> UtilityMatrix:
    """Build a utility from a short descriptor.

    Forms: ``adversarial``, ``zero``, ``semantic``, ``anti_semantic``,
    ``targets:1,0,3,...``, ``k_hot:<k>:<seed>``, ``preference:2,0,1,...``,
    or a path to a utility file.
    """
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head in ("adversarial", "zero", "k_hot") and K is None:
        raise InputError(f"utility {spec!r} needs K")
    if head == "adversarial":
        return adversarial_utility(K)
    if head == "zero":
        return zero_utility(K)
    if head in ("semantic", "anti_semantic"):
        if partition is None:
            raise InputError(f"utility {spec!r} needs a semantic partition")
        return (semantic_representative if head == "semantic" else anti_semantic_representative)(partition)
    if head == "targets" and rest:
        return one_hot_utility([int(t) for t in rest.split(",")])
    if head == "k_hot" and rest:
        k, _, seed = rest.partition(":")
        return k_hot_random(K, int(k), int(seed or 0))
    if head == "preference" and rest:
        return preference_utility([int(t) for t in rest.split(",")])
    path = Path(base_dir or ".") / spec
    if not path.exists():
        raise InputError(f"unknown utility descriptor or missing file {spec!r}")
    return UtilityMatrix.load(path)


def parse_uncertainty_set(spec: str, K: int, partition: SemanticPartition | None = None,
                          base_dir=None) -> UncertaintySet:
    """Descriptor forms: ``semantic``, ``anti_semantic``, ``all_k_hot:<k>``,
    ``singleton:<utility descriptor>``, ``explicit:<file>;<file>...``,
    ``preference:<orderings file>`` or ``preference_random:<n>:<seed>``."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head in ("semantic", "anti_semantic"):
        if partition is None:
            raise InputError(f"set {spec!r} needs a semantic partition")
        return (UncertaintySet.semantic if head == "semantic" else UncertaintySet.anti_semantic)(partition)
    if head == "all_k_hot":
        return UncertaintySet.all_k_hot(K, int(rest or 1))
    if head == "singleton":
        return UncertaintySet.singleton(parse_utility(rest, K, partition, base_dir))
    if head == "explicit":
        return UncertaintySet.explicit(parse_utility(p, K, partition, base_dir) for p in rest.split(";"))
    if head == "preference_random":
        n, _, seed = rest.partition(":")
        return UncertaintySet.preference(random_orderings(K, int(n), int(seed or 0)))
    if head == "preference":
        path = Path(base_dir or ".") / rest
        if not path.exists():
            raise InputError(f"missing orderings file {rest!r}")
        orderings = [
            tuple(int(t) for t in ln.replace(",", " ").split())
            for ln in path.read_text().splitlines() if ln.strip()
        ]
        return UncertaintySet.preference(orderings)
    raise InputError(f"unknown uncertainty set descriptor {spec!r}")
