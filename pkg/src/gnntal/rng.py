"""Keyed counter-based random streams for reproducible parallel Monte Carlo.

Every stochastic component in the package draws from a Philox stream keyed
by ``(master_seed, lane, index)``. Distinct keys give statistically
independent streams, and the same key replays the identical draw sequence on
any platform, with any number of workers, and regardless of whether values
are drawn one at a time or in batches.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = 0xFFFFFFFFFFFFFFFF
_KEY_LIMIT = 1 << 32


def derive_seed(master_seed: int, tag: str) -> int:
    """Stable 64-bit seed for a named subsystem, derived from a master seed.

    Used to give each subsystem (labeling, spread models, dropout, weight
    init, ...) its own key space so their substreams never collide even when
    the whole pipeline runs from one master seed.
    """
    digest = hashlib.sha256(f"{master_seed & _U64}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _key(master_seed: int, node: int, run: int) -> np.ndarray:
    if not (0 <= node < _KEY_LIMIT and 0 <= run < _KEY_LIMIT):
        raise ValueError(f"substream indices must lie in [0, 2^32): got ({node}, {run})")
    return np.array([master_seed & _U64, (node << 32) | run], dtype=np.uint64)


def substream(master_seed: int, node: int, run: int) -> np.random.Generator:
    """Independent random stream for one (node, run) Monte Carlo task."""
    return np.random.Generator(np.random.Philox(key=_key(master_seed, node, run)))


class StreamPool:
    """Substream source that re-keys one generator in place.

    Produces streams identical to :func:`substream` at roughly a quarter of
    the per-call cost, which matters in 10^5-run Monte Carlo loops. Not
    thread-safe: each worker owns its own pool.
    """

    def __init__(self) -> None:
        self._bitgen = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        self._gen = np.random.Generator(self._bitgen)

    def stream(self, master_seed: int, node: int, run: int) -> np.random.Generator:
        key = _key(master_seed, node, run)
        state = self._bitgen.state
        inner = state["state"]
        inner["counter"][:] = 0
        inner["key"][:] = key
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._gen
