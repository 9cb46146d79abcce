"""Counter-based SplitMix64 generator.

Every draw is ``mix(base + i * GOLDEN)`` for a stream index ``i``, so whole
blocks are produced with vectorised uint64 arithmetic and the output does not
depend on numpy's Generator stream policy.  Same seed, same bytes, on any
platform.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int, stream: int = 0) -> np.ndarray:
    """Return ``count`` uint64 words for ``(seed, stream)``."""
    base = _mix(np.array([(seed * 0x100000001B3 + stream) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(base + idx * GOLDEN)


def uniform_signed(seed: int, count: int, width: int, stream: int = 0) -> np.ndarray:
    """Uniform integers over the signed ``width``-bit range (unbiased: power-of-two modulus)."""
    words = splitmix64(seed, count, stream)
    low = (words & np.uint64((1 << width) - 1)).astype(np.int64)
    return low - (1 << (width - 1))
