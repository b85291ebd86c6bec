"""Exact integer helpers for fractional powers like ceil(N ** (p/q))."""

import math


def ceil_pow(n: int, p: int, q: int) -> int:
    """Smallest k >= 1 with k**q >= n**p."""
    target = n ** p
    k = max(1, int(round(n ** (p / q))))
    while k > 1 and (k - 1) ** q >= target:
        k -= 1
    while k ** q < target:
        k += 1
    return k


def floor_pow(n: int, p: int, q: int) -> int:
    """Largest k >= 0 with k**q <= n**p."""
    target = n ** p
    k = max(0, int(n ** (p / q)))
    while k ** q > target:
        k -= 1
    while (k + 1) ** q <= target:
        k += 1
    return k


def ceil_log(n: int, base: int) -> int:
    """Smallest k >= 0 with base**k >= n."""
    k, acc = 0, 1
    while acc < n:
        acc *= base
        k += 1
    return k


def ceil_log2(n: int) -> int:
    return max(0, (int(n) - 1).bit_length())


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for f in range(2, math.isqrt(n) + 1):
        if n % f == 0:
            return False
    return True


def prime_power(q: int):
    """Return ``(p, m)`` with ``q == p**m`` for a prime p, else ``None``."""
    if q < 2:
        return None
    for p in range(2, q + 1):
        if q % p == 0:
            if not is_prime(p):
                return None
            m = 0
            while q % p == 0:
                q //= p
                m += 1
            return (p, m) if q == 1 else None
    return None
