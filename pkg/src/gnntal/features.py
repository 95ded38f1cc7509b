"""Per-node structural descriptors and the standardized 10-column feature matrix.

Baseline centralities (k-shell, H-index, clustering, PageRank) double as
feature columns; the assembled matrix is z-scored per network so models
transfer across networks of different scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, segment_sums

FEATURE_NAMES = (
    "degree",
    "two_hop_size",
    "neighbor_degree_sum",
    "neighbor_degree_mean",
    "clustering",
    "triangles",
    "k_shell",
    "neighbor_k_shell_mean",
    "h_index",
    "pagerank",
)


class PageRankConvergenceError(RuntimeError):
    """Raised when power iteration fails to reach tolerance."""


@dataclass(frozen=True)
class CentralityVector:
    """Named per-node scores from one method."""

    method_name: str
    scores: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.scores)):
            raise ValueError(f"{self.method_name}: non-finite scores")


@dataclass(frozen=True)
class FeatureMatrix:
    """N x 10 standardized node features with the standardization recorded."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    column_means: np.ndarray
    column_stds: np.ndarray


def k_shell(g: Graph) -> CentralityVector:
    """Coreness by iterative peeling; min-degree ties resolved by lowest id."""
    n = g.num_nodes
    deg = g.degrees.astype(np.int64).copy()
    alive = np.ones(n, dtype=bool)
    core = np.zeros(n, dtype=np.int64)
    # composite key (current degree, node id) so argmin picks the tie rule
    key = deg * (n + 1) + np.arange(n)
    sentinel = np.iinfo(np.int64).max
    k = 0
    for _ in range(n):
        v = int(np.argmin(np.where(alive, key, sentinel)))
        k = max(k, int(deg[v]))
        core[v] = k
        alive[v] = False
        for u in g.neighbors_of(v):
            if alive[u]:
                deg[u] -= 1
                key[u] -= n + 1
    return CentralityVector("k_shell", core.astype(np.float64))


def h_index(g: Graph) -> CentralityVector:
    """Largest h such that at least h neighbors have degree >= h."""
    deg = g.degrees
    scores = np.zeros(g.num_nodes, dtype=np.float64)
    for v in range(g.num_nodes):
        nbr_deg = np.sort(deg[g.neighbors_of(v)])[::-1]
        h = 0
        for i, d in enumerate(nbr_deg, start=1):
            if d >= i:
                h = i
            else:
                break
        scores[v] = h
    return CentralityVector("h_index", scores)


def triangle_counts(g: Graph) -> np.ndarray:
    """Number of triangles through each node.

    t(v) = (1/2) * sum over neighbors u of |N(v) ∩ N(u)|: every triangle at v
    is seen once from each of its two other corners.
    """
    counts = np.zeros(g.num_nodes, dtype=np.int64)
    for v in range(g.num_nodes):
        nbrs = g.neighbors_of(v)
        shared = 0
        for u in nbrs:
            shared += np.intersect1d(nbrs, g.neighbors_of(int(u)), assume_unique=True).size
        counts[v] = shared // 2
    return counts


def clustering_coefficient(g: Graph) -> CentralityVector:
    """Local clustering c_v = 2*triangles(v) / (deg*(deg-1)); 0 when deg < 2."""
    deg = g.degrees.astype(np.float64)
    tri = triangle_counts(g).astype(np.float64)
    denom = deg * (deg - 1.0)
    c = np.divide(2.0 * tri, denom, out=np.zeros_like(denom), where=denom > 0)
    return CentralityVector("clustering", c)


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-9, max_iter: int = 1000) -> CentralityVector:
    """Power iteration PageRank with uniform teleport; dangling mass recycled."""
    n = g.num_nodes
    deg = g.degrees.astype(np.float64)
    x = np.full(n, 1.0 / n)
    dangling = deg == 0
    for _ in range(max_iter):
        contrib = np.divide(x, deg, out=np.zeros_like(x), where=deg > 0)
        incoming = segment_sums(g.offsets, contrib[g.neighbors])
        new = (1.0 - damping) / n + damping * (incoming + x[dangling].sum() / n)
        if np.abs(new - x).sum() < tol:
            return CentralityVector("pagerank", new)
        x = new
    raise PageRankConvergenceError(f"no convergence to {tol} within {max_iter} iterations")


def _two_hop_sizes(g: Graph) -> np.ndarray:
    sizes = np.zeros(g.num_nodes, dtype=np.float64)
    for v in range(g.num_nodes):
        nbrs = g.neighbors_of(v)
        if nbrs.size == 0:
            continue
        reach = np.unique(np.concatenate([nbrs] + [g.neighbors_of(int(u)) for u in nbrs]))
        sizes[v] = reach.size - (1 if v in reach else 0)
    return sizes


def feature_matrix(g: Graph) -> FeatureMatrix:
    """Assemble and z-score the 10 structural feature columns.

    Column order is frozen (checkpoints reject anything else). Zero-degree
    nodes contribute 0 for the neighbor-mean columns; constant columns pass
    through as all-zeros instead of dividing by a zero std.
    """
    deg = g.degrees.astype(np.float64)
    nbr_deg_sum = segment_sums(g.offsets, deg[g.neighbors])
    nbr_deg_mean = np.divide(nbr_deg_sum, deg, out=np.zeros_like(deg), where=deg > 0)
    shell = k_shell(g).scores
    nbr_shell_mean = np.divide(
        segment_sums(g.offsets, shell[g.neighbors]), deg, out=np.zeros_like(deg), where=deg > 0
    )
    raw = np.column_stack(
        [
            deg,
            _two_hop_sizes(g),
            nbr_deg_sum,
            nbr_deg_mean,
            clustering_coefficient(g).scores,
            triangle_counts(g).astype(np.float64),
            shell,
            nbr_shell_mean,
            h_index(g).scores,
            pagerank(g).scores,
        ]
    )
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    # constant up to accumulated rounding noise counts as constant
    constant = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    stds = np.where(constant, 0.0, stds)
    values = np.where(constant, 0.0, (raw - means) / np.where(constant, 1.0, stds))
    return FeatureMatrix(values=values, feature_names=FEATURE_NAMES, column_means=means, column_stds=stds)


def centrality_to_csv(vec: CentralityVector) -> str:
    """CSV with ascending node ids and 17-significant-digit reals."""
    lines = [f"node_id,{vec.method_name}"]
    lines += [f"{i},{s:.17g}" for i, s in enumerate(vec.scores)]
    return "\n".join(lines) + "\n"


def feature_matrix_to_csv(fm: FeatureMatrix) -> str:
    lines = ["node_id," + ",".join(fm.feature_names)]
    for i, row in enumerate(fm.values):
        lines.append(f"{i}," + ",".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"
