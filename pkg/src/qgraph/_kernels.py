"""Compiled loops for the sketch simulation.

The sampler issues one Cross query per (vertex, side, repetition,
sub-sample, level) cell, millions per sketch, and these loops are the
scatter steps that numpy cannot express without sorting.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def level_masks(u, v, lv, bits, n, k, L):
    """OR of sub-sample masks per (vertex, side, rep, exact level).

    Pair p = (u[p], v[p]) with u < v belongs to the larger side of u and
    the smaller side of v.  Returns an array of shape (n * 2 * k, L).
    """
    out = np.zeros((n * 2 * k, L), dtype=np.uint64)
    for i in range(k):
        for p in range(u.shape[0]):
            z = lv[i, p]
            b = bits[i, p]
            out[(u[p] * 2 + 0) * k + i, z] |= b
            out[(v[p] * 2 + 1) * k + i, z] |= b
    return out


@njit(cache=True)
def _mix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def pair_split(keys, pid, cap, sub):
    """Per rep and pair: top level (leading zeros capped at cap) and low-bit mask.

    Matches ``hash_array`` followed by ``leading_zeros`` and masking; bit
    ``sub`` of the mask is set on every pair to mark the whole sample.
    """
    k, P = keys.shape[0], pid.shape[0]
    lv = np.zeros((k, P), dtype=np.int8)
    bits = np.zeros((k, P), dtype=np.uint64)
    low = (np.uint64(1) << np.uint64(sub)) - np.uint64(1)
    whole = np.uint64(1) << np.uint64(sub)
    for i in range(k):
        mk = _mix(keys[i])
        for p in range(P):
            h = _mix(pid[p] ^ mk)
            z = 0
            while z < cap and not (h >> np.uint64(63 - z)) & np.uint64(1):
                z += 1
            lv[i, p] = z
            bits[i, p] = (h & low) | whole
    return lv, bits


@njit(cache=True)
def block_counts(masks, J):
    """Levels per (segment, bit): masks are suffix-ORed, so count = top level + 1."""
    n_seg, L = masks.shape
    out = np.zeros((n_seg, J), dtype=np.int64)
    for seg in range(n_seg):
        seen = np.uint64(0)
        for z in range(L - 1, -1, -1):
            new = masks[seg, z] & ~seen
            if new:
                seen |= new
                for j in range(J):
                    if (new >> np.uint64(j)) & np.uint64(1):
                        out[seg, j] = z + 1
    return out


# de Bruijn lookup: index of an isolated set bit in a 64-bit word
_DEBRUIJN = np.uint64(0x022FDD63CC95386D)
_BITPOS = np.zeros(64, dtype=np.int64)
for _j in range(64):
    _BITPOS[((1 << _j) * 0x022FDD63CC95386D % (1 << 64)) >> 58] = _j


@njit(cache=True)
def fill_answers(u, v, m, lv, bits, k, J, L, n, starts):
    """Cross answers per cell, in block order, from the edge list.

    Block b = seg * J + j occupies ``starts[b]:starts[b + 1]``, one entry
    per level.  One repetition at a time, edges are scattered into a small
    dense (vertex, side, j, level) buffer at their top level, summed over
    higher levels, and copied out.
    """
    out = np.zeros(starts[-1], dtype=np.int32)
    buf = np.zeros((n * 2, J, L), dtype=np.int32)
    for i in range(k):
        buf[:] = 0
        for e in range(u.shape[0]):
            z = lv[i, e]
            b = bits[i, e]
            for side in range(2):
                row = u[e] * 2 if side == 0 else v[e] * 2 + 1
                rest = b
                while rest:
                    low = rest & (~rest + np.uint64(1))
                    buf[row, _BITPOS[(low * _DEBRUIJN) >> np.uint64(58)], z] += m[e]
                    rest ^= low
        for row in range(n * 2):
            base = (row * k + i) * J
            for j in range(J):
                lo = starts[base + j]
                cnt = starts[base + j + 1] - lo
                acc = 0
                for z in range(L - 1, -1, -1):
                    acc += buf[row, j, z]
                    if z < cnt:
                        out[lo + z] = acc
    return out


@njit(cache=True)
def signed_tables(answers, starts, n, k, J, L):
    """Larger-side minus smaller-side answers as dense (n, k, J, L) tables."""
    out = np.zeros((n, k, J, L), dtype=np.int32)
    for w in range(n):
        for side in range(2):
            for i in range(k):
                base = ((w * 2 + side) * k + i) * J
                for j in range(J):
                    z = 0
                    for q in range(starts[base + j], starts[base + j + 1]):
                        if side == 0:
                            out[w, i, j, z] += answers[q]
                        else:
                            out[w, i, j, z] -= answers[q]
                        z += 1
    return out
