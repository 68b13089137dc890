"""Pinned, portable random streams.

Every stochastic operation draws from Philox4x64-10 keyed with a 64-bit seed
(counter starts at zero). Uniform doubles are ``(u64 >> 11) * 2**-53``, as
produced by :meth:`numpy.random.Generator.random`. Gaussian variates come from
the inverse normal CDF applied to uniforms shifted into the open interval, so a
reimplementation only needs Philox and an ``ndtri`` to reproduce a case.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np
from scipy.special import ndtri

_HALF_ULP = 2.0 ** -54
SEED_MASK = (1 << 64) - 1


def stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from an arbitrary tuple of ints/strings/floats."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return struct.unpack("<Q", h.digest())[0]


def uniform(gen: np.random.Generator, size) -> np.ndarray:
    """Uniform doubles in [0, 1)."""
    return gen.random(size)


def normal(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normal variates via inverse CDF of open-interval uniforms."""
    return ndtri(gen.random(size) + _HALF_ULP)


def sample_indices(gen: np.random.Generator, n: int, m: int) -> np.ndarray:
    """``m`` distinct indices out of ``range(n)``, returned in ascending order.

    Draws one uniform key per index and keeps the ``m`` smallest keys (stable
    ordering breaks equal keys by index).
    """
    keys = uniform(gen, n)
    chosen = np.argsort(keys, kind="stable")[:m]
    return np.sort(chosen)
