"""Rank-agreement metrics: Kendall correlation and top-k Jaccard similarity."""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ScoreSequence:
    """Per-node scores from one ranking method, aligned to node ids."""

    method: str
    scores: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.scores)):
            raise ValueError(f"{self.method}: non-finite scores")


def _as_array(seq) -> np.ndarray:
    if isinstance(seq, ScoreSequence):
        return np.asarray(seq.scores, dtype=np.float64)
    return np.asarray(seq, dtype=np.float64)


def _merge_count(values: list[float]) -> int:
    """Pairs (i < j) with values[i] > values[j], by bottom-up merge sort."""
    a = values
    n = len(a)
    buf = [0.0] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n - width, 2 * width):
            mid = lo + width
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[i] <= a[j]:
                    buf[k] = a[i]
                    i += 1
                else:
                    buf[k] = a[j]
                    inversions += mid - i
                    j += 1
                k += 1
            buf[k:hi] = a[i:mid] if i < mid else a[j:hi]
            a[lo:hi] = buf[lo:hi]
        width *= 2
    return inversions


def _tie_pairs(sorted_vals: np.ndarray) -> int:
    """Sum of t*(t-1)/2 over runs of equal values (input must be sorted)."""
    if sorted_vals.size == 0:
        return 0
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0)
    runs = np.diff(np.concatenate([[0], boundaries + 1, [sorted_vals.size]]))
    return int((runs * (runs - 1) // 2).sum())


def kendall_tau(a, b, variant: str = "tau_b") -> float:
    """Kendall rank correlation between two aligned score sequences.

    tau_a divides concordant-minus-discordant pairs by all l(l-1)/2 pairs;
    tau_b corrects both denominators for ties. Computed via merge-sort
    inversion counting in O(l log l); ties contribute to neither C nor D.
    """
    if variant not in ("tau_a", "tau_b"):
        raise ValueError(f"unknown variant {variant!r}")
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 elements")
    n0 = n * (n - 1) // 2
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    ties_x = _tie_pairs(xs)
    ties_y = _tie_pairs(np.sort(y))
    # pairs tied in both x and y: equal (x, y) rows are consecutive after lexsort
    ties_xy = 0
    run = 1
    for i in range(1, n):
        if xs[i] == xs[i - 1] and ys[i] == ys[i - 1]:
            run += 1
        else:
            ties_xy += run * (run - 1) // 2
            run = 1
    ties_xy += run * (run - 1) // 2
    discordant = _merge_count(ys.tolist())
    c_minus_d = n0 - ties_x - ties_y + ties_xy - 2 * discordant
    if variant == "tau_a":
        return c_minus_d / n0
    denom = sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0.0:
        return 0.0  # a fully tied sequence carries no rank information
    return c_minus_d / denom


def top_k_ids(scores, k: int) -> set[int]:
    """Ids of the k best-scored nodes; boundary ties go to lower ids."""
    arr = _as_array(scores)
    if not 1 <= k <= arr.size:
        raise ValueError(f"k must lie in [1, {arr.size}], got {k}")
    order = np.lexsort((np.arange(arr.size), -arr))
    return {int(i) for i in order[:k]}


def jaccard_topk(a, b, k: int) -> float:
    """Intersection-over-union of the two top-k node sets."""
    u = top_k_ids(a, k)
    v = top_k_ids(b, k)
    return len(u & v) / len(u | v)


def method_matrix(sequences: Sequence[ScoreSequence], variant: str = "tau_b") -> tuple[list[str], np.ndarray]:
    """Pairwise Kendall correlations between methods; diagonal is 1."""
    if len(sequences) < 2:
        raise ValueError("need at least 2 sequences")
    lengths = {s.scores.size for s in sequences}
    if len(lengths) != 1:
        raise ValueError(f"sequences have differing lengths: {sorted(lengths)}")
    m = len(sequences)
    out = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = kendall_tau(sequences[i], sequences[j], variant)
    return [s.method for s in sequences], out


def matrix_to_csv(names: list[str], matrix: np.ndarray) -> str:
    lines = ["method," + ",".join(names)]
    for name, row in zip(names, matrix):
        lines.append(name + "," + ",".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"
