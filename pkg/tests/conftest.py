"""Shared fixtures: the oracle-backed model grid used across the suite."""

import numpy as np
import pytest

from votefuse.graph import DependencyGraph


def star(m: int) -> DependencyGraph:
    return DependencyGraph(n_tasks=1, n_sources=m, assignment=(0,) * m)


def star_with_edges(m: int, edges) -> DependencyGraph:
    return DependencyGraph(n_tasks=1, n_sources=m, assignment=(0,) * m,
                           source_edges=tuple(edges))


def chain3() -> DependencyGraph:
    """Three chained tasks with three conditionally independent sources each."""
    return DependencyGraph(
        n_tasks=3, n_sources=9,
        assignment=(0, 0, 0, 1, 1, 1, 2, 2, 2),
        task_edges=((0, 1), (1, 2)),
    )


def acceptance_grid():
    """The 12 (graph, seed, abstaining) models used by the closure criteria."""
    return [
        (star(3), 11, True),
        (star(3), 12, False),
        (star(5), 21, True),
        (star(5), 22, False),
        (star_with_edges(5, [(0, 1)]), 23, True),
        (star_with_edges(5, [(0, 1)]), 24, False),
        (star(8), 31, True),
        (star_with_edges(8, [(1, 2)]), 32, True),
        (star_with_edges(8, [(1, 2)]), 33, False),
        (star_with_edges(8, [(0, 1), (4, 5)]), 34, True),
        (star_with_edges(8, [(0, 1), (4, 5)]), 35, False),
        (chain3(), 41, True),
    ]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)
