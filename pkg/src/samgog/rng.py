"""Counter-based random streams.

Every random decision in the library is keyed by a tuple of integers
(master seed, epoch, sample index, node id, ...) pushed through a
splitmix64 chain.  Streams are therefore reproducible bit-for-bit no
matter how work is scheduled across threads: drawing the same counter
range always yields the same values.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_SHIFT30 = np.uint64(30)
_SHIFT27 = np.uint64(27)
_SHIFT31 = np.uint64(31)
_SHIFT11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance the counter and return the mixed output."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return (z ^ (z >> 31)) & _MASK


def mix(*parts: int) -> int:
    """Fold integer parts into a single 64-bit stream key.

    Order-sensitive: mix(a, b) != mix(b, a) in general.
    """
    acc = 0x243F6A8885A308D3
    for p in parts:
        acc = splitmix64((acc ^ (int(p) & _MASK)) & _MASK)
    return acc


def _mix_array(x: np.ndarray) -> np.ndarray:
    # vectorized splitmix64 output function over uint64 counters
    x = x + _U_GOLDEN
    x = (x ^ (x >> _SHIFT30)) * _U_MIX1
    x = (x ^ (x >> _SHIFT27)) * _U_MIX2
    return x ^ (x >> _SHIFT31)


def uniforms(key: int, counters: np.ndarray, *, open_low: bool = False) -> np.ndarray:
    """Uniform doubles indexed by counter under the given stream key.

    Default range is [0, 1); with ``open_low`` the range is (0, 1], which is
    what log-of-uniform perturbed keys need.
    """
    with np.errstate(over="ignore"):
        bits = _mix_array(np.uint64(key) + counters.astype(np.uint64))
    mant = (bits >> _SHIFT11).astype(np.float64)
    if open_low:
        return (mant + 1.0) * _INV53
    return mant * _INV53


def vector_keys(base: int, ids: np.ndarray) -> np.ndarray:
    """Stream keys for many ids at once; matches mix(*parts, id) when ``base``
    is mix(*parts)."""
    with np.errstate(over="ignore"):
        return _mix_array(np.uint64(base) ^ ids.astype(np.uint64))


def key_uniforms(
    keys: np.ndarray, counters: np.ndarray, *, open_low: bool = False
) -> np.ndarray:
    """Uniforms for broadcast (key, counter) pairs; see ``uniforms``."""
    with np.errstate(over="ignore"):
        bits = _mix_array(keys.astype(np.uint64) + counters.astype(np.uint64))
    mant = (bits >> _SHIFT11).astype(np.float64)
    if open_low:
        return (mant + 1.0) * _INV53
    return mant * _INV53


def generator(*parts: int) -> np.random.Generator:
    """A numpy Generator seeded from the mixed key, for bulk non-critical draws."""
    return np.random.default_rng(mix(*parts))
