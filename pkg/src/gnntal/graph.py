"""Immutable undirected graphs in compressed adjacency form.

Edge-list I/O, synthetic generators for pre-training, component extraction
and degree statistics. All graphs are simple (no self-loops, no duplicate
edges), undirected and unweighted; neighbor lists are stored sorted so that
every downstream pass is deterministic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .rng import derive_seed, substream


class GraphFormatError(ValueError):
    """Raised on malformed edge-list input."""


@dataclass(frozen=True)
class DegreeStats:
    """First and second moments of the degree distribution."""

    mean_degree: float
    mean_square_degree: float


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with CSR-style adjacency.

    ``offsets`` has length ``num_nodes + 1``; the neighbors of node ``v`` are
    ``neighbors[offsets[v]:offsets[v + 1]]``, sorted ascending. ``node_labels``
    keeps the original string tokens when the graph came from an edge list.
    """

    num_nodes: int
    offsets: np.ndarray
    neighbors: np.ndarray
    node_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.offsets.flags.writeable = False
        self.neighbors.flags.writeable = False

    @property
    def num_edges(self) -> int:
        return self.neighbors.size // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v] : self.offsets[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors_of(u)
        i = np.searchsorted(nbrs, v)
        return i < nbrs.size and nbrs[i] == v

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each edge once as (u, v) with u < v, in sorted order."""
        for u in range(self.num_nodes):
            for v in self.neighbors_of(u):
                if u < v:
                    yield u, int(v)

    def content_hash(self) -> str:
        """SHA-256 of the canonical edge-list text; used for cache validation."""
        return hashlib.sha256(save_edge_list(self).encode()).hexdigest()


def from_edges(
    num_nodes: int,
    edges: Iterable[tuple[int, int]],
    node_labels: Sequence[str] | None = None,
) -> Graph:
    """Build a canonical Graph, dropping self-loops and duplicate edges."""
    pairs = set()
    for u, v in edges:
        if u == v:
            continue
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise ValueError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
        pairs.add((min(u, v), max(u, v)))
    if pairs:
        arr = np.array(sorted(pairs), dtype=np.int64)
        both = np.concatenate([arr, arr[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=num_nodes)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        neighbors = both[:, 1].copy()
    else:
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        neighbors = np.empty(0, dtype=np.int64)
    labels = tuple(node_labels) if node_labels is not None else None
    if labels is not None and len(labels) != num_nodes:
        raise ValueError("node_labels length must equal num_nodes")
    return Graph(num_nodes, offsets, neighbors, labels)


def load_edge_list(source: str | bytes | IO) -> Graph:
    """Parse a whitespace-separated edge list into a canonical Graph.

    One edge per line, two tokens, lines starting with '#' ignored. Node ids
    are assigned in first-appearance order; the original tokens are kept as
    ``node_labels``. Duplicate edges and self-loops are silently dropped.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    ids: dict[str, int] = {}
    labels: list[str] = []
    edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise GraphFormatError(
                f"line {lineno}: expected 2 node tokens, got {len(tokens)}: {stripped!r}"
            )
        pair = []
        for tok in tokens:
            if tok not in ids:
                ids[tok] = len(labels)
                labels.append(tok)
            pair.append(ids[tok])
        edges.append((pair[0], pair[1]))
    if not labels:
        raise GraphFormatError("empty edge list: no edges or nodes found")
    return from_edges(len(labels), edges, node_labels=labels)


def save_edge_list(g: Graph) -> str:
    """Canonical text form: one 'u v' line per edge, u < v, sorted."""
    lines = [f"{u} {v}" for u, v in g.edges()]
    return "\n".join(lines) + ("\n" if lines else "")


def segment_sums(offsets: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Per-node sums of ``values`` over CSR slices; empty slices give 0.

    Exact for integer-valued float inputs below 2^53 (cumulative sums of
    such values stay integral).
    """
    if values.size == 0:
        return np.zeros(offsets.size - 1, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(values, dtype=np.float64)])
    return csum[offsets[1:]] - csum[offsets[:-1]]


def degree_stats(g: Graph) -> DegreeStats:
    """<k> and <k^2> of the degree distribution (exact in double precision)."""
    if g.num_nodes < 1:
        raise ValueError("graph must have at least one node")
    deg = g.degrees.astype(np.float64)
    return DegreeStats(float(deg.mean()), float((deg * deg).mean()))


def gen_er(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p); each pair independently becomes an edge."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    stream = substream(derive_seed(seed, "gen-er"), 0, 0)
    iu, ju = np.triu_indices(n, k=1)
    keep = stream.random(iu.size) < p
    edges = zip(iu[keep].tolist(), ju[keep].tolist())
    return from_edges(n, edges)


def gen_ba(n: int, m: int, seed: int) -> Graph:
    """Barabasi-Albert preferential attachment.

    Starts from a clique on m+1 nodes; each later node attaches to m distinct
    existing nodes chosen proportionally to degree, so
    |E| = m(m+1)/2 + (n-m-1)*m.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    stream = substream(derive_seed(seed, "gen-ba"), 0, 0)
    edges: list[tuple[int, int]] = []
    # each endpoint appears once per incident edge; sampling from this list
    # is sampling proportional to degree
    repeated: list[int] = []
    for u in range(m + 1):
        for v in range(u + 1, m + 1):
            edges.append((u, v))
            repeated.append(u)
            repeated.append(v)
    for v in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            t = repeated[int(stream.integers(0, len(repeated)))]
            targets.add(t)
        for t in sorted(targets):
            edges.append((v, t))
            repeated.append(v)
            repeated.append(t)
    return from_edges(n, edges)


def gen_ws(n: int, k: int, beta: float, seed: int) -> Graph:
    """Watts-Strogatz ring lattice with probabilistic rewiring.

    Each node starts connected to its k/2 nearest neighbors on each side;
    every (node, right-neighbor) edge is rewired with probability beta to a
    uniformly random non-duplicate target.
    """
    if k % 2 != 0 or not 0 <= k < n:
        raise ValueError(f"k must be even and lie in [0, n), got k={k}, n={n}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    stream = substream(derive_seed(seed, "gen-ws"), 0, 0)
    adj: list[set[int]] = [set() for _ in range(n)]
    for j in range(1, k // 2 + 1):
        for i in range(n):
            adj[i].add((i + j) % n)
            adj[(i + j) % n].add(i)
    for j in range(1, k // 2 + 1):
        for i in range(n):
            target = (i + j) % n
            if target not in adj[i]:
                continue  # already rewired away
            if stream.random() >= beta:
                continue
            if len(adj[i]) >= n - 1:
                continue  # node saturated, nothing valid to rewire to
            while True:
                w = int(stream.integers(0, n))
                if w != i and w not in adj[i]:
                    break
            adj[i].discard(target)
            adj[target].discard(i)
            adj[i].add(w)
            adj[w].add(i)
    edges = ((u, v) for u in range(n) for v in adj[u] if u < v)
    return from_edges(n, edges)


def largest_component(g: Graph) -> Graph:
    """Induced subgraph on the largest connected component, ids remapped.

    Component members keep their relative order, so the remap is stable;
    node labels (when present) follow their nodes.
    """
    if g.num_nodes < 1:
        raise ValueError("graph must have at least one node")
    comp = np.full(g.num_nodes, -1, dtype=np.int64)
    n_comp = 0
    for start in range(g.num_nodes):
        if comp[start] >= 0:
            continue
        comp[start] = n_comp
        frontier = [start]
        while frontier:
            nxt: list[int] = []
            for u in frontier:
                for v in g.neighbors_of(u):
                    if comp[v] < 0:
                        comp[v] = n_comp
                        nxt.append(int(v))
            frontier = nxt
        n_comp += 1
    sizes = np.bincount(comp, minlength=n_comp)
    best = int(np.argmax(sizes))  # ties: lowest component id, i.e. earliest node
    members = np.flatnonzero(comp == best)
    remap = {int(old): new for new, old in enumerate(members)}
    edges = (
        (remap[int(u)], remap[int(v)])
        for u in members
        for v in g.neighbors_of(int(u))
        if u < v
    )
    labels = None
    if g.node_labels is not None:
        labels = tuple(g.node_labels[int(old)] for old in members)
    return from_edges(members.size, edges, node_labels=labels)
