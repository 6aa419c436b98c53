"""Independent reference computations used by the tests (mpmath and brute-force enumeration)."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 50


def mp_upper_tail(n: int, p: float, k: int) -> mp.mpf:
    """P(Y >= k) for Y ~ Binomial(n, p) in 50-digit arithmetic."""
    p = mp.mpf(p)
    return mp.fsum(mp.binomial(n, i) * p**i * (1 - p) ** (n - i) for i in range(k, n + 1))


def mp_abs_moment(n: int, p: float, q: float) -> mp.mpf:
    p = mp.mpf(p)
    return mp.fsum(
        mp.binomial(n, i) * p**i * (1 - p) ** (n - i) * abs(i - n * p) ** q for i in range(n + 1)
    )


def mp_kl(q: float, p: float) -> mp.mpf:
    q, p = mp.mpf(q), mp.mpf(p)
    out = mp.mpf(0)
    if q > 0:
        out += q * mp.log(q / p)
    if q < 1:
        out += (1 - q) * mp.log((1 - q) / (1 - p))
    return out


def enumerate_sup(blocks: list[tuple[int, float]], n: int, side: str) -> dict[float, float]:
    """Exact distribution of the sup-deviation over independent coordinates.

    Enumerates every joint outcome of the per-coordinate success counts;
    only usable for a handful of coordinates and small n.
    """
    coords = [q for count, q in blocks for _ in range(count)]
    marg = [[math.comb(n, k) * q**k * (1 - q) ** (n - k) for k in range(n + 1)] for q in coords]
    dist: dict[float, float] = {}
    for ks in itertools.product(range(n + 1), repeat=len(coords)):
        prob = 1.0
        worst = 0.0
        for k, q, m in zip(ks, coords, marg):
            prob *= m[k]
            d = k / n - q
            dev = {"two_sided": abs(d), "upper": max(d, 0.0), "lower": max(-d, 0.0)}[side]
            worst = max(worst, dev)
        dist[worst] = dist.get(worst, 0.0) + prob
    return dist


def expectation(dist: dict[float, float]) -> float:
    return math.fsum(v * p for v, p in dist.items())


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, j) for j in range(1, m + 1)), Fraction(0))
