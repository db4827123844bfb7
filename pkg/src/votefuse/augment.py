"""Lifting ternary votes and the dependency graph into the binary model space.

Each source becomes a column pair: a vote of +1 maps to (1, -1), a vote of -1
to (-1, 1), and an abstain to (1, 1) or (-1, -1) with balanced frequency. The
abstain fill-in is keyed per column by the abstain's ordinal position, so
augmenting is deterministic, replayable, and order-independent across columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .graph import AugmentedLabelMatrix, DependencyGraph, LabelMatrix

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; deterministic across platforms (wraps mod 2^64)."""
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return x


def _coin(seed: int, column: int, ordinals: np.ndarray) -> np.ndarray:
    """Fair +/-1 coins for the given abstain ordinals of one column."""
    base = _mix64(np.asarray([np.uint64(seed & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64))[0]
    key = _mix64(base + np.uint64(column))
    bits = _mix64(key + ordinals.astype(np.uint64))
    return np.where((bits >> np.uint64(63)).astype(bool), np.int8(1), np.int8(-1))


@dataclass(frozen=True)
class AbstainPolicy:
    """How abstain pairs are realized.

    ``alternating`` assigns (1,1) to even abstain ordinals and (-1,-1) to odd
    ones, per column in row order, so among k abstains exactly ceil(k/2) are
    (1,1). ``seeded-random`` draws a fair coin keyed by (seed, column, abstain
    ordinal). ``phase`` offsets the ordinals per column, which lets a batch
    augmentation reproduce the state of a stream mid-flight.
    """

    mode: str = "alternating"
    seed: int = 0
    phase: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.mode not in ("alternating", "seeded-random"):
            raise ValueError(f"unknown abstain policy mode {self.mode!r}")
        if self.phase is not None:
            object.__setattr__(self, "phase", tuple(int(p) for p in self.phase))

    def fill_values(self, column: int, ordinals: np.ndarray) -> np.ndarray:
        """The +/-1 value shared by both pair columns for each abstain ordinal."""
        off = 0 if self.phase is None else self.phase[column]
        shifted = ordinals + off
        if self.mode == "alternating":
            return np.where(shifted % 2 == 0, np.int8(1), np.int8(-1))
        return _coin(self.seed, column, shifted)


def augment_matrix(L: LabelMatrix, policy: AbstainPolicy = AbstainPolicy()) -> AugmentedLabelMatrix:
    """Pair-encode a label matrix; deterministic given (L, policy)."""
    votes = L.votes
    n, m = votes.shape
    out = np.empty((n, 2 * m), dtype=np.int8)
    out[:, 0::2] = votes
    out[:, 1::2] = -votes
    for j in range(m):
        rows = np.nonzero(votes[:, j] == 0)[0]
        if rows.size == 0:
            continue
        vals = policy.fill_values(j, np.arange(rows.size, dtype=np.int64))
        out[rows, 2 * j] = vals
        out[rows, 2 * j + 1] = vals
    return AugmentedLabelMatrix(out)


def augment_row(row: np.ndarray, policy: AbstainPolicy,
                abstain_counts: np.ndarray) -> np.ndarray:
    """Pair-encode a single vote row for streaming ingestion.

    ``abstain_counts[j]`` is the number of abstains already seen in column j;
    it is advanced in place so consecutive calls continue the per-column
    ordinal sequence.
    """
    row = np.asarray(row, dtype=np.int8)
    m = row.shape[0]
    out = np.empty(2 * m, dtype=np.int8)
    out[0::2] = row
    out[1::2] = -row
    for j in np.nonzero(row == 0)[0]:
        val = policy.fill_values(int(j), np.asarray([abstain_counts[j]], dtype=np.int64))[0]
        out[2 * j] = val
        out[2 * j + 1] = val
        abstain_counts[j] += 1
    return out


@dataclass(frozen=True)
class AugmentedGraph:
    """The dependency graph lifted to the paired observed-variable space.

    Vertices are D hidden tasks plus 2m observed columns. Every column links
    to its source's task; each pair carries an internal abstain-rate edge; a
    dependency edge between two sources induces all four edges between their
    pairs.
    """

    graph: DependencyGraph

    @property
    def n_tasks(self) -> int:
        return self.graph.n_tasks

    @property
    def n_columns(self) -> int:
        return 2 * self.graph.n_sources

    @property
    def n_vertices(self) -> int:
        return self.n_tasks + self.n_columns

    def source_of(self, col: int) -> int:
        return col // 2

    def task_of(self, col: int) -> int:
        return self.graph.assignment[col // 2]

    def lift(self, source: int) -> Tuple[int, int]:
        return 2 * source, 2 * source + 1

    def accuracy_edges(self) -> Tuple[Tuple[int, int], ...]:
        """(column, task) edges."""
        return tuple((c, self.task_of(c)) for c in range(self.n_columns))

    def abstain_edges(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((2 * i, 2 * i + 1) for i in range(self.graph.n_sources))

    def cross_edges(self) -> Tuple[Tuple[int, int], ...]:
        out = []
        for a, b in self.graph.source_edges:
            for ca in self.lift(a):
                for cb in self.lift(b):
                    out.append((ca, cb))
        return tuple(out)

    def source_components(self) -> Tuple[int, ...]:
        """Component id per source in the dependency-edge graph.

        A chain of dependency edges is an observed path between pairs that
        never touches a hidden vertex, so every source in a connected
        component is conditionally dependent on every other.
        """
        cached = self.__dict__.get("_comp_cache")
        if cached is None:
            m = self.graph.n_sources
            comp = list(range(m))

            def find(x):
                while comp[x] != x:
                    comp[x] = comp[comp[x]]
                    x = comp[x]
                return x

            for a, b in self.graph.source_edges:
                comp[find(a)] = find(b)
            cached = tuple(find(i) for i in range(m))
            self.__dict__["_comp_cache"] = cached
        return cached

    def dependent_sources(self, i: int) -> Tuple[int, ...]:
        """All sources conditionally dependent on source i (including itself)."""
        comp = self.source_components()
        return tuple(s for s in range(self.graph.n_sources) if comp[s] == comp[i])

    def columns_dependent(self, a: int, b: int) -> bool:
        """Conditional dependence test between observed columns given the
        hidden layer: same source's pair, or sources connected through
        dependency edges."""
        comp = self.source_components()
        return comp[a // 2] == comp[b // 2]


def augment_graph(g: DependencyGraph) -> AugmentedGraph:
    """Lift a validated dependency graph into the paired observed space."""
    return AugmentedGraph(graph=g)
