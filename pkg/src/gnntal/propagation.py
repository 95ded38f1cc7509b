"""Monte Carlo spreading engines: SIR labeling, SI curves, IC and LT cascades.

Every engine is a pure function of (graph, parameters, master_seed). Each
(node, run) task draws from its own counter-based substream and infection
attempts within a step are evaluated in ascending (source id, target id)
order, so results are bitwise identical for any worker count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import Graph, degree_stats, segment_sums
from .rng import StreamPool, derive_seed

SPREAD_MODELS = ("SI", "IC", "LT")


class SingularThresholdError(ValueError):
    """Raised when <k^2> <= <k> makes the epidemic threshold formula singular."""


@dataclass(frozen=True)
class Beta:
    """Epidemic threshold beta and the transmission probability 1.01*beta.

    ``clamped`` flags the dense-graph corner case where 1.01*beta exceeded 1
    and beta_th was capped.
    """

    beta: float
    beta_th: float
    clamped: bool = False


@dataclass(frozen=True)
class InfluenceLabels:
    """Mean final outbreak size per source node over repeated SIR runs."""

    node_ids: np.ndarray
    mean_infected: np.ndarray
    runs: int
    beta_th: float
    master_seed: int

    def as_dict(self) -> dict[int, float]:
        return {int(n): float(m) for n, m in zip(self.node_ids, self.mean_infected)}


@dataclass(frozen=True)
class SpreadResult:
    """Averaged outcome of repeated spread simulations from a seed set."""

    model: str
    seed_set: tuple[int, ...]
    mean_final_active: float
    runs: int
    stderr_final: float = 0.0
    per_step_mean: np.ndarray | None = None
    per_step_stderr: np.ndarray | None = None
    params: dict = field(default_factory=dict)


def epidemic_threshold(g: Graph) -> Beta:
    """beta = <k> / (<k^2> - <k>), transmission probability 1.01*beta.

    Raises SingularThresholdError when <k^2> <= <k> (isolated nodes or bare
    edges only), where the formula has no positive solution.
    """
    stats = degree_stats(g)
    denom = stats.mean_square_degree - stats.mean_degree
    if denom <= 0.0:
        raise SingularThresholdError(
            f"<k^2>={stats.mean_square_degree} <= <k>={stats.mean_degree}: "
            "epidemic threshold undefined for this graph"
        )
    beta = stats.mean_degree / denom
    beta_th = 1.01 * beta
    clamped = beta_th > 1.0
    if clamped:
        warnings.warn(
            f"transmission probability 1.01*beta = {beta_th:.6g} exceeds 1; clamping",
            stacklevel=2,
        )
        beta_th = 1.0
    return Beta(beta=beta, beta_th=beta_th, clamped=clamped)


def _frontier_attempts(g: Graph, frontier: np.ndarray) -> np.ndarray:
    """Concatenated neighbor targets of a sorted frontier.

    Frontier ascending + per-node sorted neighbor lists give the canonical
    ascending (source, target) attempt order.
    """
    if frontier.size == 1:
        return g.neighbors_of(int(frontier[0]))
    return np.concatenate([g.neighbors_of(int(u)) for u in frontier])


def sir_run(g: Graph, source: int, beta_th: float, stream: np.random.Generator) -> int:
    """One discrete-time SIR outbreak; returns the final number of R nodes.

    Infectious period is exactly one step: every I node attempts each
    currently susceptible neighbor once with probability beta_th, then
    recovers. Terminates when no I nodes remain; the source counts toward
    the result.
    """
    if not 0 <= source < g.num_nodes:
        raise ValueError(f"source {source} out of range")
    status = np.zeros(g.num_nodes, dtype=np.uint8)  # 0=S 1=I 2=R
    status[source] = 1
    frontier = np.array([source], dtype=np.int64)
    recovered = 0
    while frontier.size:
        targets = _frontier_attempts(g, frontier)
        sus = targets[status[targets] == 0]
        hits = sus[stream.random(sus.size) < beta_th] if sus.size else sus
        status[frontier] = 2
        recovered += frontier.size
        frontier = np.unique(hits)
        status[frontier] = 1
    return recovered


def sir_label(
    g: Graph,
    nodes: Sequence[int],
    beta_th: float,
    runs: int = 1000,
    master_seed: int = 0,
    workers: int = 1,
) -> InfluenceLabels:
    """Mean SIR outbreak size for each requested source node.

    Run r for node v draws from substream(master_seed, v, r); per-node means
    accumulate in run order, so output is identical for any worker count.
    """
    node_arr = np.asarray(list(nodes), dtype=np.int64)
    if node_arr.size == 0:
        raise ValueError("nodes must be non-empty")
    if runs < 1:
        raise ValueError("runs must be >= 1")

    def label_one(v: int) -> float:
        pool = StreamPool()
        total = 0.0
        for r in range(runs):
            total += sir_run(g, v, beta_th, pool.stream(master_seed, v, r))
        return total / runs

    if workers <= 1:
        means = [label_one(int(v)) for v in node_arr]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(label_one, (int(v) for v in node_arr)))
    return InfluenceLabels(
        node_ids=node_arr,
        mean_infected=np.array(means, dtype=np.float64),
        runs=runs,
        beta_th=beta_th,
        master_seed=master_seed,
    )


def _check_seeds(g: Graph, seeds: Sequence[int]) -> np.ndarray:
    arr = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if arr.size == 0:
        raise ValueError("seed set must be non-empty")
    if arr[0] < 0 or arr[-1] >= g.num_nodes:
        raise ValueError("seed node out of range")
    return arr


def si_spread_curve(
    g: Graph,
    seeds: Sequence[int],
    beta_th: float,
    runs: int = 1000,
    max_steps: int = 30,
    master_seed: int = 0,
) -> SpreadResult:
    """SI spreading: per-step mean infected count (infected never recover).

    The curve has max_steps + 1 entries (step 0 is the seed set); once a run
    saturates its count is carried forward.
    """
    seed_arr = _check_seeds(g, seeds)
    seed_key = derive_seed(master_seed, "spread-si")
    pool = StreamPool()
    counts = np.zeros((runs, max_steps + 1), dtype=np.float64)
    for r in range(runs):
        stream = pool.stream(seed_key, r, 0)
        active = np.zeros(g.num_nodes, dtype=bool)
        active[seed_arr] = True
        n_active = seed_arr.size
        counts[r, 0] = n_active
        frontier = seed_arr
        for t in range(1, max_steps + 1):
            if n_active < g.num_nodes and frontier.size:
                targets = _frontier_attempts(g, np.flatnonzero(active))
                sus = targets[~active[targets]]
                hits = sus[stream.random(sus.size) < beta_th] if sus.size else sus
                new = np.unique(hits)
                active[new] = True
                n_active += new.size
                frontier = new if new.size else frontier
            counts[r, t] = n_active
    mean = counts.mean(axis=0)
    stderr = counts.std(axis=0, ddof=1) / np.sqrt(runs) if runs > 1 else np.zeros(max_steps + 1)
    return SpreadResult(
        model="SI",
        seed_set=tuple(int(v) for v in seed_arr),
        mean_final_active=float(mean[-1]),
        runs=runs,
        stderr_final=float(stderr[-1]),
        per_step_mean=mean,
        per_step_stderr=stderr,
        params={"beta_th": beta_th, "max_steps": max_steps, "master_seed": master_seed},
    )


def ic_spread(
    g: Graph,
    seeds: Sequence[int],
    p: float,
    runs: int = 1000,
    master_seed: int = 0,
) -> SpreadResult:
    """Independent Cascade: each new activation gets one chance per inactive neighbor."""
    seed_arr = _check_seeds(g, seeds)
    seed_key = derive_seed(master_seed, "spread-ic")
    pool = StreamPool()
    total = 0.0
    total_sq = 0.0
    for r in range(runs):
        stream = pool.stream(seed_key, r, 0)
        active = np.zeros(g.num_nodes, dtype=bool)
        active[seed_arr] = True
        n_active = seed_arr.size
        frontier = seed_arr
        while frontier.size:
            targets = _frontier_attempts(g, frontier)
            inactive = targets[~active[targets]]
            hits = inactive[stream.random(inactive.size) < p] if inactive.size else inactive
            frontier = np.unique(hits)
            active[frontier] = True
            n_active += frontier.size
        total += n_active
        total_sq += n_active * n_active
    mean = total / runs
    var = max(total_sq / runs - mean * mean, 0.0) * (runs / max(runs - 1, 1))
    return SpreadResult(
        model="IC",
        seed_set=tuple(int(v) for v in seed_arr),
        mean_final_active=mean,
        runs=runs,
        stderr_final=float(np.sqrt(var / runs)),
        params={"p": p, "master_seed": master_seed},
    )


def lt_spread(
    g: Graph,
    seeds: Sequence[int],
    runs: int = 1000,
    master_seed: int = 0,
    thresholds: np.ndarray | None = None,
) -> SpreadResult:
    """Linear Threshold: node v activates once active-neighbor weight reaches theta_v.

    Incoming weights are 1/deg(v); thresholds are Uniform(0, 1] resampled per
    run. ``thresholds`` pins them instead (test hook: near-zero thresholds
    make the spread equal the component closure of the seeds).
    """
    seed_arr = _check_seeds(g, seeds)
    seed_key = derive_seed(master_seed, "spread-lt")
    pool = StreamPool()
    deg = g.degrees.astype(np.float64)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    total = 0.0
    total_sq = 0.0
    for r in range(runs):
        stream = pool.stream(seed_key, r, 0)
        theta = thresholds if thresholds is not None else 1.0 - stream.random(g.num_nodes)
        active = np.zeros(g.num_nodes, dtype=bool)
        active[seed_arr] = True
        changed = True
        while changed:
            incoming = active[g.neighbors].astype(np.float64)
            weight_in = segment_sums(g.offsets, incoming) * inv_deg
            newly = (~active) & (weight_in >= theta) & (deg > 0)
            changed = bool(newly.any())
            active |= newly
        n_active = int(active.sum())
        total += n_active
        total_sq += n_active * n_active
    mean = total / runs
    var = max(total_sq / runs - mean * mean, 0.0) * (runs / max(runs - 1, 1))
    return SpreadResult(
        model="LT",
        seed_set=tuple(int(v) for v in seed_arr),
        mean_final_active=mean,
        runs=runs,
        stderr_final=float(np.sqrt(var / runs)),
        params={"master_seed": master_seed},
    )
