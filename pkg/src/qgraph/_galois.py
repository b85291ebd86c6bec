"""Small finite fields GF(p**m) with table arithmetic.

Elements are integers ``0..q-1`` read as base-p digit vectors, i.e. the
coefficients of a polynomial over GF(p) reduced by a fixed irreducible
polynomial of degree m.
"""

from functools import lru_cache

import numpy as np

from ._intmath import prime_power


def _digits(x, p, m):
    out = []
    for _ in range(m):
        out.append(x % p)
        x //= p
    return out


def _from_digits(ds, p):
    x = 0
    for d in reversed(ds):
        x = x * p + d
    return x


def _polymulmod(a, b, modpoly, p):
    m = len(modpoly) - 1
    prod = [0] * (2 * m - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    # modpoly is monic: x^m = -(lower terms)
    for k in range(len(prod) - 1, m - 1, -1):
        c = prod[k]
        if c:
            prod[k] = 0
            for j in range(m):
                prod[k - m + j] = (prod[k - m + j] - c * modpoly[j]) % p
    return prod[:m]


def _irreducible(p, m):
    """First monic irreducible polynomial of degree m over GF(p), low degree first."""
    if m == 1:
        return [0, 1]
    for tail in range(p ** m):
        poly = _digits(tail, p, m) + [1]
        if poly[0] == 0:
            continue
        # irreducible iff no monic factor of degree <= m/2
        if not any(_divides(f, poly, p) for f in _monic_polys(p, m // 2)):
            return poly
    raise ValueError("no irreducible polynomial found")


def _monic_polys(p, max_deg):
    for deg in range(1, max_deg + 1):
        for tail in range(p ** deg):
            yield _digits(tail, p, deg) + [1]


def _divides(f, g, p):
    g = list(g)
    df = len(f) - 1
    inv = pow(f[-1], p - 2, p)
    for k in range(len(g) - 1, df - 1, -1):
        c = (g[k] * inv) % p
        if c:
            for j in range(df + 1):
                g[k - df + j] = (g[k - df + j] - c * f[j]) % p
    return all(c == 0 for c in g[:df])


@lru_cache(maxsize=None)
def field_tables(q: int):
    """Addition and multiplication tables of GF(q) as numpy arrays."""
    pm = prime_power(q)
    if pm is None:
        raise ValueError(f"{q} is not a prime power")
    p, m = pm
    if m == 1:
        r = np.arange(q)
        return (r[:, None] + r[None, :]) % q, (r[:, None] * r[None, :]) % q
    modpoly = _irreducible(p, m)
    digits = [_digits(x, p, m) for x in range(q)]
    add = np.zeros((q, q), dtype=np.int64)
    mul = np.zeros((q, q), dtype=np.int64)
    for a in range(q):
        for b in range(q):
            add[a, b] = _from_digits([(x + y) % p for x, y in zip(digits[a], digits[b])], p)
            mul[a, b] = _from_digits(_polymulmod(digits[a], digits[b], modpoly, p), p)
    return add, mul
