"""Shared builders and independent oracles used across the test suite."""

from __future__ import annotations

import itertools
from collections import defaultdict

import numpy as np
import pytest

from gnntal.graph import Graph, from_edges

# ---------------------------------------------------------------------------
# Tiny canonical graphs
# ---------------------------------------------------------------------------

MICRO_EDGE_SETS = {
    "star": [(0, 1), (0, 2), (0, 3), (0, 4)],
    "path": [(0, 1), (1, 2), (2, 3)],
    "triangle": [(0, 1), (0, 2), (1, 2)],
    "k4": [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    "two_triangles_bridge": [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)],
}

MICRO_NODE_COUNTS = {
    "star": 5,
    "path": 4,
    "triangle": 3,
    "k4": 4,
    "two_triangles_bridge": 6,
}


def micro_graph(name: str) -> Graph:
    return from_edges(MICRO_NODE_COUNTS[name], MICRO_EDGE_SETS[name])


@pytest.fixture
def star() -> Graph:
    return micro_graph("star")


@pytest.fixture
def path4() -> Graph:
    return micro_graph("path")


@pytest.fixture
def triangle() -> Graph:
    return micro_graph("triangle")


@pytest.fixture
def k4() -> Graph:
    return micro_graph("k4")


# ---------------------------------------------------------------------------
# Exhaustive-enumeration oracle for cascade expectations
# ---------------------------------------------------------------------------


def cascade_expectation(n: int, edges: list[tuple[int, int]], seeds, p: float) -> float:
    """Exact expected final size of an IC cascade (equivalently one-step SIR).

    Both processes are equivalent to reachability over independently live
    directed attempt edges: every undirected edge contributes two directed
    attempts, each live with probability p. Enumerates all 2^(2|E|) worlds.
    """
    directed = [(u, v) for u, v in edges] + [(v, u) for u, v in edges]
    m = len(directed)
    seeds = list(seeds)
    expectation = 0.0
    for mask in range(1 << m):
        live = defaultdict(list)
        k = 0
        for i, (u, v) in enumerate(directed):
            if mask >> i & 1:
                live[u].append(v)
                k += 1
        prob = p**k * (1.0 - p) ** (m - k)
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            u = stack.pop()
            for v in live[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        expectation += prob * len(seen)
    return expectation


def lt_expectation_grid(n: int, edges: list[tuple[int, int]], seeds, grid: int = 400) -> float:
    """Expected LT spread by midpoint integration over non-seed thresholds.

    Brute-force reference for tiny graphs: runs the synchronous LT fixpoint
    on every grid cell of the threshold hypercube.
    """
    g = from_edges(n, edges)
    deg = g.degrees.astype(float)
    seeds = sorted(set(seeds))
    free = [v for v in range(n) if v not in seeds]
    pts = (np.arange(grid) + 0.5) / grid  # midpoints of (0,1]
    total = 0.0
    for combo in itertools.product(pts, repeat=len(free)):
        theta = np.ones(n)
        for v, t in zip(free, combo):
            theta[v] = t
        active = np.zeros(n, dtype=bool)
        active[seeds] = True
        changed = True
        while changed:
            changed = False
            for v in range(n):
                if active[v] or deg[v] == 0:
                    continue
                w = active[g.neighbors_of(v)].sum() / deg[v]
                if w >= theta[v]:
                    active[v] = True
                    changed = True
        total += active.sum()
    return total / grid ** len(free)
