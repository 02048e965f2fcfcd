"""Deterministic seed derivation for experiment cells and Monte Carlo trials.

Every random quantity in the package is drawn from a generator keyed by a
root seed plus a structured cell key (strings and integers).  Results are
therefore independent of execution order, which is what makes parallel runs
byte-identical to serial ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_entropy(part) -> int:
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    raise TypeError(f"seed key parts must be str or int, got {type(part).__name__}")


def derive_seed(root: int, *parts) -> np.random.SeedSequence:
    """SeedSequence keyed by a root seed and a structured cell key."""
    entropy = [int(root) & _MASK64] + [_as_entropy(p) for p in parts]
    return np.random.SeedSequence(entropy)


def rng_for(root: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *parts))


def seed_u64(root: int, *parts) -> int:
    """A plain integer seed for interfaces that take one (e.g. draw_sample)."""
    return int(derive_seed(root, *parts).generate_state(1, np.uint64)[0])
