"""Log-space binomial machinery: pmf, tails, quantiles, KL bounds and moments.

The log-pmf uses Loader's saddle-point decomposition
(``stirlerr`` + deviance ``bd0``), which keeps relative accuracy near machine
precision for every n instead of losing ~log10(n) digits to cancellation of
large log-gamma values.  Tails are accumulated in log space from the tail
extremity inward, so probabilities like exp(-1e5) are represented exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, rel_entr

from .constants import DEFAULT_CONSTANTS, ConcentrationConstants
from .errors import ResourceError, ValidationError

LN_2PI = math.log(2.0 * math.pi)
MAX_SUPPORT = 10**6

# stirlerr(n) for n = 0..15, computed from log-gamma (small enough to be exact to ~1e-16)
_SMALL = np.arange(16, dtype=float)
_STIRLERR_TABLE = np.where(
    _SMALL > 0,
    gammaln(_SMALL + 1) - (_SMALL + 0.5) * np.log(np.where(_SMALL > 0, _SMALL, 1.0)) + _SMALL - 0.5 * LN_2PI,
    0.0,
)


@dataclass(frozen=True)
class BinomialSpec:
    n: int
    p: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"p must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))


def stirlerr(n: np.ndarray) -> np.ndarray:
    """ln(n!) - ln(sqrt(2 pi n) (n/e)^n) for non-negative integers n."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    out[small] = _STIRLERR_TABLE[n[small].astype(int)]
    m = n[~small]
    nn = m * m
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    out[~small] = np.select(
        [m > 500, m > 80, m > 35],
        [
            (s0 - s1 / nn) / m,
            (s0 - (s1 - s2 / nn) / nn) / m,
            (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / m,
        ],
        (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / m,
    )
    return out


def bd0(x: np.ndarray, npr: np.ndarray) -> np.ndarray:
    """Deviance term x ln(x/np) + np - x, cancellation-free near x = np."""
    x = np.asarray(x, dtype=float)
    npr = np.broadcast_to(np.asarray(npr, dtype=float), x.shape)
    out = np.empty_like(x)
    near = np.abs(x - npr) < 0.1 * (x + npr)
    xs, ms = x[near], npr[near]
    v = (xs - ms) / (xs + ms)
    s = (xs - ms) * v
    ej = 2 * xs * v
    v2 = v * v
    # |v| < 0.1 so each series term shrinks by >= 100; 12 terms reach double precision
    for j in range(1, 13):
        ej = ej * v2
        s = s + ej / (2 * j + 1)
    out[near] = s
    xf, mf = x[~near], npr[~near]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out[~near] = np.where(xf > 0, xf * np.log(xf / mf), 0.0) + mf - xf
    return out


def log_pmf(spec: BinomialSpec, k: np.ndarray | None = None) -> np.ndarray:
    """ln P(Y = k) for Y ~ B(n, p); the whole support when ``k`` is omitted."""
    n, p = spec.n, spec.p
    k = np.arange(n + 1) if k is None else np.asarray(k)
    kf = k.astype(float)
    out = np.full(kf.shape, -np.inf)
    inside = (kf >= 0) & (kf <= n)
    if p == 0.0:
        out[kf == 0] = 0.0
        return out
    if p == 1.0:
        out[kf == n] = 0.0
        return out
    q = 1.0 - p
    out[kf == 0] = n * math.log1p(-p)
    out[kf == n] = n * math.log(p)
    mid = inside & (kf > 0) & (kf < n)
    km = kf[mid]
    lc = (
        stirlerr(np.array([n]))[0]
        - stirlerr(km)
        - stirlerr(n - km)
        - bd0(km, n * p)
        - bd0(n - km, n * q)
    )
    lf = LN_2PI + np.log(km) + np.log1p(-km / n)
    out[mid] = lc - 0.5 * lf
    return out


def _log1mexp(a: np.ndarray) -> np.ndarray:
    """ln(1 - e^a) for a <= 0."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(a > -math.log(2), np.log(-np.expm1(a)), np.log1p(-np.exp(a)))


@lru_cache(maxsize=64)
def _tails(n: int, p: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    spec = BinomialSpec(n, p)
    if n > MAX_SUPPORT:
        raise ResourceError(f"n = {n} exceeds the support cap {MAX_SUPPORT}")
    lp = log_pmf(spec)
    with np.errstate(invalid="ignore"):
        # inward accumulation from each extremity
        sf_direct = np.logaddexp.accumulate(lp[::-1])[::-1]
        cdf_direct = np.logaddexp.accumulate(lp)
    half = -math.log(2.0)
    log_sf = np.empty(n + 2)
    log_sf[n + 1] = -np.inf
    log_sf[0] = 0.0
    comp = _log1mexp(np.minimum(cdf_direct[:-1], 0.0))  # ln P(Y >= k) from the lower tail, k = 1..n
    log_sf[1 : n + 1] = np.where(sf_direct[1:] <= half, sf_direct[1:], comp)
    log_cdf = np.empty(n + 1)
    log_cdf[n] = 0.0
    comp_c = _log1mexp(np.minimum(sf_direct[1:], 0.0))  # ln P(Y <= k) from the upper tail, k = 0..n-1
    log_cdf[:n] = np.where(cdf_direct[:n] <= half, cdf_direct[:n], comp_c)
    for arr in (lp, log_sf, log_cdf):
        arr.setflags(write=False)
    return lp, log_sf, log_cdf


def log_sf_array(spec: BinomialSpec) -> np.ndarray:
    """ln P(Y >= k) for k = 0..n+1 (read-only, cached)."""
    return _tails(spec.n, spec.p)[1]


def log_cdf_array(spec: BinomialSpec) -> np.ndarray:
    """ln P(Y <= k) for k = 0..n (read-only, cached)."""
    return _tails(spec.n, spec.p)[2]


def log_upper_tail(spec: BinomialSpec, k: int) -> float:
    """ln P(Y >= k) for 0 <= k <= n + 1."""
    if not 0 <= k <= spec.n + 1:
        raise ValidationError(f"k must lie in [0, n+1] = [0, {spec.n + 1}], got {k}")
    return float(log_sf_array(spec)[k])


def kl_bernoulli(q: float, p: float) -> float:
    """D(q || p) between Bernoulli(q) and Bernoulli(p), with 0 ln 0 = 0."""
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"q must lie in [0, 1], got {q}")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    if q == p:
        return 0.0
    if p in (0.0, 1.0):
        raise ValidationError(f"D(q||p) is infinite for p = {p} and q = {q} != p")
    return float(rel_entr(q, p) + rel_entr(1.0 - q, 1.0 - p))


def bennett_h(u: float) -> float:
    """h(u) = (1 + u) ln(1 + u) - u."""
    return (1.0 + u) * math.log1p(u) - u


@dataclass(frozen=True)
class TailBounds:
    chernoff: float
    anti: float | None
    bennett: float


def analytic_tail_bounds(
    spec: BinomialSpec, q: float, consts: ConcentrationConstants = DEFAULT_CONSTANTS
) -> TailBounds:
    """Log-scale Chernoff upper, anti-concentration lower and Bennett upper bounds on P(Y/n >= q)."""
    n, p = spec.n, spec.p
    if not p <= q <= 1.0:
        raise ValidationError(f"need p <= q <= 1, got p = {p}, q = {q}")
    if q == p:
        d = 0.0
    elif p == 0.0:
        d = math.inf
    else:
        d = kl_bernoulli(q, p)
    chernoff = -n * d
    anti = None
    if p > 0.0 and 1.0 / n <= q <= (1.0 + p) / 2.0:
        anti = math.log(consts.c0) - consts.C_anti * n * d
    var = p * (1.0 - p)
    t = q - p
    if t == 0.0:
        bennett = 0.0
    elif var == 0.0:
        bennett = -math.inf
    else:
        bennett = -n * var * bennett_h(t / var)
    return TailBounds(chernoff=chernoff, anti=anti, bennett=bennett)


def abs_central_moment_exact(spec: BinomialSpec, q: float) -> float:
    """E|Y - np|^q by exact summation over the support."""
    if q < 1:
        raise ValidationError(f"moment order must be >= 1, got {q}")
    if spec.n > MAX_SUPPORT:
        raise ResourceError(f"n = {spec.n} exceeds the support cap {MAX_SUPPORT}")
    if spec.p in (0.0, 1.0):
        return 0.0
    k = np.arange(spec.n + 1, dtype=float)
    dev = np.abs(k - spec.n * spec.p)
    with np.errstate(divide="ignore"):
        terms = np.exp(log_pmf(spec) + q * np.log(dev))
    return math.fsum(terms.tolist())


@dataclass(frozen=True)
class PsiValue:
    value: float
    regime: str  # "subgaussian" | "loggamma" | "poisson"


def psi_q(spec: BinomialSpec, q: float) -> PsiValue:
    """Three-regime closed form tracking E|Y - np|^q up to q-dependent constants.

    Threshold ties go to the larger-p regime.
    """
    n, p = spec.n, spec.p
    if q < 1:
        raise ValidationError(f"moment order must be >= 1, got {q}")
    if p > 0.5:
        raise ValidationError(f"p must lie in [0, 1/2], got {p}")
    if p >= q / (2 * n):
        return PsiValue((n * p * q) ** (q / 2), "subgaussian")
    if p >= q / (n * math.exp(q)):
        return PsiValue((q / math.log(q / (n * p))) ** q, "loggamma")
    return PsiValue(n * p, "poisson")


def binom_quantile(spec: BinomialSpec, log_target: float) -> int:
    """Smallest k in [0, n+1] with ln P(Y >= k) <= log_target."""
    if log_target > 0:
        raise ValidationError(f"log_target must be <= 0, got {log_target}")
    neg = -log_sf_array(spec)  # non-decreasing in k
    return int(np.searchsorted(neg, -log_target, side="left"))
