"""Deterministic random-stream derivation from one root seed.

Every consumer derives its generator from ``(root_seed, *keys)`` through
:class:`numpy.random.SeedSequence` spawn keys, so results depend only on the
root seed and the work-unit labels, never on execution order.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["root_seed", "child_generator", "child_seed"]


def root_seed(seed) -> int:
    """Normalize an int, ``None`` or Generator into a 64-bit integer seed."""
    if seed is None:
        return 0
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63))
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        if seed < 0:
            raise InvalidArgumentError("seed must be non-negative")
        return int(seed)
    raise InvalidArgumentError(f"unsupported seed type {type(seed).__name__}")


def child_generator(seed, *keys: int) -> np.random.Generator:
    """Generator for work unit ``keys`` under ``seed``."""
    ss = np.random.SeedSequence(root_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def child_seed(seed, *keys: int) -> int:
    ss = np.random.SeedSequence(root_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))
