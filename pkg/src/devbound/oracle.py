"""Exact distribution of the sup-deviation for independent block sequences.

Inside block b all J_b coordinates are iid Binomial(n, q_b)/n, so
P(M <= t) = prod_b P_b(t)^{J_b}.  The CDF only jumps at the grid deviations
|k/n - q_b|; integrating 1 - F over those breakpoints gives E[M] with no
quadrature error.  Each factor is carried as ln(-ln P_b(t)) so that J_b can be
e^{10^4} and 1 - P_b as small as exp(-10^5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .binomial import BinomialSpec, abs_central_moment_exact, log_cdf_array, log_sf_array
from .errors import ResourceError, ValidationError
from .sequences import BlockView

SIDES = ("two_sided", "upper", "lower")
MAX_N = 10**5
MAX_BREAKPOINTS = 10**7
_LOG_HALF = -math.log(2.0)


@dataclass(frozen=True)
class ExactResult:
    value: float
    breakpoints_used: int
    side: str
    log_domain_min: float


@dataclass(frozen=True)
class SupCdf:
    """P(M <= t) at the sorted breakpoints t (right-continuous step function)."""

    t: np.ndarray
    cdf: np.ndarray
    survival: np.ndarray  # 1 - cdf, computed without cancellation
    log_domain_min: float


def _check(view: BlockView, n: int, side: str) -> None:
    if side not in SIDES:
        raise ValidationError(f"side must be one of {SIDES}, got {side!r}")
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if n > MAX_N:
        raise ResourceError(f"n = {n} exceeds the oracle cap {MAX_N}")
    if (n + 1) * len(view) > MAX_BREAKPOINTS:
        raise ResourceError(f"(n+1) * blocks = {(n + 1) * len(view)} exceeds the cap {MAX_BREAKPOINTS}")


def _grid(n: int, q: float) -> tuple[int, np.ndarray, np.ndarray]:
    """First k with k/n >= q, the upward deviations from it, and the strictly positive downward ones."""
    dev = np.arange(n + 1) / n - q
    k0 = int(np.searchsorted(dev, 0.0, side="left"))
    up = dev[k0:]
    low = -dev[:k0][::-1]
    return k0, up, low


def log_neg_log(log_x: np.ndarray, log_p: np.ndarray) -> np.ndarray:
    """ln(-ln P) given ln(1 - P) and ln P, picking whichever is accurate."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = np.exp(log_x)
        small = np.where(log_x < -700, log_x, np.log(-np.log1p(-np.minimum(x, 0.5))))
        large = np.log(-log_p)
    return np.where(log_x <= _LOG_HALF, small, large)


def sup_cdf(view: BlockView, n: int, side: str = "two_sided") -> SupCdf:
    _check(view, n, side)
    grids = [_grid(n, b.q) for b in view]
    pieces = [np.zeros(1)]
    for _, up, low in grids:
        if side in ("two_sided", "upper"):
            pieces.append(up)
        if side in ("two_sided", "lower"):
            pieces.append(low)
    t = np.unique(np.concatenate(pieces))
    t = t[t >= 0]
    acc = np.full(t.shape, -np.inf)  # ln sum_b J_b (-ln P_b(t))
    log_min = 0.0
    for b, (k0, up, low) in zip(view, grids):
        spec = BinomialSpec(n, b.q)
        log_sf = log_sf_array(spec)  # index k -> ln P(Y >= k), k = 0..n+1
        log_cdf_pad = np.concatenate(([-np.inf], log_cdf_array(spec)))  # index k+1 -> ln P(Y <= k)
        kmax = np.full(t.shape, n)
        kmin = np.zeros(t.shape, dtype=int)
        if side in ("two_sided", "upper"):
            kmax = k0 - 1 + np.searchsorted(up, t, side="right")
        if side in ("two_sided", "lower"):
            kmin = k0 - np.searchsorted(low, t, side="right")
        above = log_sf[kmax + 1]  # ln P(Y > kmax)
        below = log_cdf_pad[kmin]  # ln P(Y < kmin)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_x = np.logaddexp(above, below)
            hi = log_cdf_pad[kmax + 1]
            ratio = np.where(kmin <= kmax, below - hi, 0.0)
            log_p = np.where(kmin <= kmax, hi + np.log(-np.expm1(np.minimum(ratio, 0.0))), -np.inf)
        finite = log_x[np.isfinite(log_x)]
        if finite.size:
            log_min = min(log_min, float(finite.min()))
        acc = np.logaddexp(acc, b.log_count + log_neg_log(log_x, log_p))
    with np.errstate(over="ignore"):
        s = np.exp(acc)
        survival = -np.expm1(-s)
        cdf = np.exp(-s)
    return SupCdf(t, cdf, survival, log_min)


def exact_sup_expectation(view: BlockView, n: int, side: str = "two_sided") -> ExactResult:
    """E sup_j dev(j), where dev is |p_hat - p|, (p_hat - p)_+ or (p - p_hat)_+."""
    c = sup_cdf(view, n, side)
    value = math.fsum((c.survival[:-1] * np.diff(c.t)).tolist())
    return ExactResult(value, int(c.t.size), side, c.log_domain_min)


def sup_quantile(view: BlockView, n: int, level: float, side: str = "two_sided") -> float:
    """Smallest breakpoint t with P(M <= t) >= level."""
    if not 0 < level < 1:
        raise ValidationError(f"level must lie in (0, 1), got {level}")
    c = sup_cdf(view, n, side)
    i = int(np.searchsorted(c.cdf >= level, True))  # cdf is non-decreasing
    return float(c.t[min(i, c.t.size - 1)])


def exact_lq_moment(view: BlockView, n: int, qnorm: float) -> float:
    """E ||p_hat - p||_q^q summed over all coordinates."""
    if not qnorm >= 1:
        raise ValidationError(f"qnorm must be >= 1, got {qnorm}")
    counts = view.integer_counts()
    terms = [
        c * abs_central_moment_exact(BinomialSpec(n, b.q), qnorm) / n**qnorm
        for c, b in zip(counts, view)
        if b.q > 0
    ]
    return math.fsum(terms)


@dataclass(frozen=True)
class PoissonQuantities:
    p_any_success: float
    U: float  # sup_j n j p(j)
    V: float  # sum_j n p(j)


def poisson_exact(view: BlockView, n: int) -> PoissonQuantities:
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    blocks = [b for b in view if b.q > 0]
    if not blocks:
        return PoissonQuantities(0.0, 0.0, 0.0)
    lc = np.array([b.log_count for b in blocks])
    q = np.array([b.q for b in blocks])
    log_j_end = np.array([b.end_log_j for b in blocks])
    with np.errstate(over="ignore"):
        log_rate = float(logsumexp(lc + math.log(n) + np.log(-np.log1p(-q))))
        p_any = float(-np.expm1(-np.exp(log_rate)))
        U = float(np.exp(np.max(math.log(n) + log_j_end + np.log(q))))
        V = float(np.exp(logsumexp(lc + math.log(n) + np.log(q))))
    return PoissonQuantities(p_any, U, V)
