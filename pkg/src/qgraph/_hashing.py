"""Keyed 64-bit hashing used for reproducible random designs.

Every randomized design in the package (sampled index sets, pair samples,
per-trial seeds) is a pure function of a key built from integers, so the
same membership can be recomputed by the algorithm, the oracle and tests.
"""

import numpy as np

MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix_int(x):
    x = (x + _GOLDEN) & MASK
    x = ((x ^ (x >> 30)) * _M1) & MASK
    x = ((x ^ (x >> 27)) * _M2) & MASK
    return x ^ (x >> 31)


def derive_key(*parts):
    """Fold a sequence of non-negative integers into one 64-bit key."""
    key = 0x5EED
    for p in parts:
        key = mix_int(key ^ (int(p) & MASK))
    return key


def mix_array(x):
    """``mix_int`` applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_keys(key, *shape):
    """``derive_key(key, i, j, ...)`` for every index of a grid, as uint64."""
    out = np.full((), mix_int(0x5EED ^ (int(key) & MASK)), dtype=np.uint64)
    for axis, size in enumerate(shape):
        idx = np.arange(size, dtype=np.uint64).reshape((1,) * axis + (size,))
        out = mix_array(out[..., None] ^ idx)
    return out


def hash_array(key, x):
    """Hash an integer array under ``key``; returns uint64 values.

    ``key`` may also be a uint64 array of keys that broadcasts against x.
    """
    if isinstance(key, (np.ndarray, np.integer)):
        k = mix_array(key)
    else:
        k = np.uint64(mix_int(key))
    return mix_array(np.asarray(x, dtype=np.uint64) ^ k)


def hash_int(key, x):
    return mix_int((int(x) & MASK) ^ mix_int(key))


def leading_zeros(h, cap):
    """Number of leading zero bits of each uint64 in ``h``, capped at ``cap``.

    A value with z leading zeros lies below 2**64 / 2**z, so this is the
    largest power-of-two rate 1/2**z at which the value is still sampled.
    """
    h = np.asarray(h, dtype=np.uint64)
    if cap <= 0:
        return np.zeros(h.shape, dtype=np.int64)
    if cap <= 52:
        # the top cap bits are exact in a float, and frexp gives their bit length
        top = (h >> np.uint64(64 - cap)).astype(np.float64)
        return cap - np.frexp(top)[1].astype(np.int64)
    out = np.zeros(h.shape, dtype=np.int64)
    for z in range(1, cap + 1):
        out += h < np.uint64(1 << (64 - z))
    return out


def below_rate(h, log2_rate):
    """True where a hash falls in a sample kept with probability 2**-log2_rate."""
    if log2_rate <= 0:
        return np.ones(np.shape(h), dtype=bool)
    return np.asarray(h, dtype=np.uint64) < np.uint64(1 << (64 - log2_rate))
