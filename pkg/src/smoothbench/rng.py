"""Deterministic seed derivation shared by every module.

One master seed (unsigned 64-bit) governs a run.  Child seeds are derived by
mixing an index path into the master seed with splitmix64, a fixed counter
based 64-bit hash.  The same (master, path) always yields the same child, so
replicates can run in any order or on any number of workers and still
reproduce bit-identical output.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

# Fixed substream indices of a session seed.  Tangent draws get a dedicated
# per-step substream so adding or removing tangent sampling never perturbs
# the primal trajectory.
STREAM_PRIMAL = 1
STREAM_NOISE = 2
STREAM_TANGENT = 3


def splitmix64(x: int) -> int:
    """One splitmix64 output step (finalizer included)."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(master: int, *path: int) -> int:
    """Mix an index path (replicate, stream, step, ...) into a master seed."""
    state = master & _MASK
    for idx in path:
        state = splitmix64(state ^ ((idx + 1) * _GOLDEN & _MASK))
    return state


def make_rng(master: int, *path: int) -> np.random.Generator:
    """PCG64 generator seeded from the derived child seed."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *path)))
