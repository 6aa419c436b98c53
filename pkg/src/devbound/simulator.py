"""Monte-Carlo estimates of sup-deviations under several sampling models.

Trials are split into fixed-size chunks; chunk c draws from its own stream
``SeedSequence(seed, spawn_key=(c,))``.  The chunking never depends on the
number of workers, so results are identical for any thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.stats import binomtest

from .binomial import BinomialSpec, log_cdf_array, log_sf_array
from .errors import ResourceError, ValidationError
from .oracle import SIDES, log_neg_log
from .sequences import BlockView, ProbSeq

CHUNK_TRIALS = 2048
MAX_DIRECT_COUNT = 10**7
_BATCH_ELEMENTS = 1 << 20  # binomial draws per sub-batch in direct mode
MODES = ("direct", "max_inversion")


@dataclass(frozen=True)
class ProductSup:
    """Independent coordinates, block b holding J_b copies of Bernoulli(q_b)."""

    view: BlockView
    side: str = "two_sided"
    mode: str = "direct"

    def __post_init__(self) -> None:
        if self.side not in SIDES:
            raise ValidationError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "max_inversion" and self.side != "upper":
            raise ValidationError("max_inversion mode only simulates the upper side")
        if self.mode == "direct":
            for c in self.view.integer_counts():
                if c > MAX_DIRECT_COUNT:
                    raise ResourceError(f"block count {c} exceeds the direct-mode cap {MAX_DIRECT_COUNT}")


@dataclass(frozen=True)
class CoupledSup:
    """Comonotone coordinates X(j) = 1[U <= p(j)] sharing one uniform per sample.

    ``interval=True`` takes the sup over every u in [0, p(1)] instead of the
    values actually taken by the sequence.
    """

    seq: ProbSeq
    interval: bool = False


@dataclass(frozen=True)
class TwoPoint:
    """Coordinates on {0, eta}, eta = sqrt(2 n sum sigma^2), with the given variances' scaling."""

    seq: ProbSeq


@dataclass(frozen=True)
class CdfSup:
    """sup_{u <= x0} |F_n(u) - u| for n iid uniforms."""

    x0: float

    def __post_init__(self) -> None:
        if not 0 < self.x0 <= 1:
            raise ValidationError(f"x0 must lie in (0, 1], got {self.x0}")


@dataclass(frozen=True)
class ProductNorm:
    """||p_hat - p||_qnorm for independent coordinates (all counts drawn explicitly)."""

    view: BlockView
    qnorm: float = 2.0

    def __post_init__(self) -> None:
        if not self.qnorm >= 1:
            raise ValidationError(f"qnorm must be >= 1, got {self.qnorm}")
        for c in self.view.integer_counts():
            if c > MAX_DIRECT_COUNT:
                raise ResourceError(f"block count {c} exceeds the direct-mode cap {MAX_DIRECT_COUNT}")


Target = Union[ProductSup, CoupledSup, TwoPoint, CdfSup, ProductNorm]


@dataclass(frozen=True)
class SimPlan:
    seed: int
    trials: int
    n: int
    target: Target
    workers: int | None = None

    def __post_init__(self) -> None:
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValidationError(f"trials must be a positive integer, got {self.trials}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if self.workers is not None and self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    quantiles: dict[float, float]
    tail_probs: dict[float, tuple[float, float, float]]
    trials: int
    seed: int | None = None
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)


# ---------------------------------------------------------------- per-chunk samplers


def _block_extremes(rng: np.random.Generator, n: int, q: float, count: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Max and min of ``count`` iid Binomial(n, q) draws, for each of m trials."""
    hi = np.full(m, -1, dtype=np.int64)
    lo = np.full(m, n + 1, dtype=np.int64)
    cols = max(1, _BATCH_ELEMENTS // m)
    done = 0
    while done < count:
        w = min(cols, count - done)
        y = rng.binomial(n, q, size=(m, w))
        np.maximum(hi, y.max(axis=1), out=hi)
        np.minimum(lo, y.min(axis=1), out=lo)
        done += w
    return hi, lo


def _block_max_inversion(rng: np.random.Generator, n: int, q: float, log_count: float, m: int) -> np.ndarray:
    """Max of e^{log_count} iid Binomial(n, q) draws via P(max <= k) = F(k)^J."""
    spec = BinomialSpec(n, q)
    log_neg = log_neg_log(log_sf_array(spec)[1:], log_cdf_array(spec))  # ln(-ln F(k)), decreasing
    e = rng.standard_exponential(m)  # -ln U
    thresh = np.log(e) - log_count
    return np.searchsorted(-log_neg, -thresh, side="left")


def _product_values(rng: np.random.Generator, n: int, target: ProductSup, m: int, scale: float = 1.0) -> np.ndarray:
    out = np.zeros(m)
    counts = target.view.integer_counts() if target.mode == "direct" else None
    for i, b in enumerate(target.view):
        if b.q == 0.0:
            continue
        if target.mode == "max_inversion":
            mx = _block_max_inversion(rng, n, b.q, b.log_count, m)
            np.maximum(out, mx / n - b.q, out=out)
            continue
        hi, lo = _block_extremes(rng, n, b.q, counts[i], m)
        if target.side in ("two_sided", "upper"):
            np.maximum(out, hi / n - b.q, out=out)
        if target.side in ("two_sided", "lower"):
            np.maximum(out, b.q - lo / n, out=out)
    return out * scale


def _norm_values(rng: np.random.Generator, n: int, target: ProductNorm, m: int) -> np.ndarray:
    acc = np.zeros(m)
    for c, b in zip(target.view.integer_counts(), target.view):
        if b.q == 0.0:
            continue
        cols = max(1, _BATCH_ELEMENTS // m)
        done = 0
        while done < c:
            w = min(cols, c - done)
            y = rng.binomial(n, b.q, size=(m, w))
            acc += (np.abs(y / n - b.q) ** target.qnorm).sum(axis=1)
            done += w
    return acc ** (1.0 / target.qnorm)


def _sorted_uniforms(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return np.sort(rng.random((m, n)), axis=1)


def cdf_sup_from_sorted(u: np.ndarray, x0: float) -> np.ndarray:
    """Exact sup_{v <= x0} |F_n(v) - v| for each row of sorted samples."""
    m, n = u.shape
    i = np.arange(1, n + 1)
    inside = u <= x0
    dev = np.maximum(np.abs(i / n - u), np.abs((i - 1) / n - u))
    body = np.where(inside, dev, 0.0).max(axis=1) if n else np.zeros(m)
    end = np.abs(inside.sum(axis=1) / n - x0)
    return np.maximum(body, end)


def coupled_sup_from_sorted(u: np.ndarray, seq: ProbSeq) -> np.ndarray:
    """Exact sup over the sequence's values v of |F_n(v) - v| for each row of sorted samples.

    F_n equals i/n on [u_(i), u_(i+1)); only the smallest and largest values
    inside each such segment can attain the sup.
    """
    m, n = u.shape
    left = np.concatenate([np.zeros((m, 1)), u], axis=1)
    right = np.concatenate([u, np.full((m, 1), np.inf)], axis=1)
    level = np.arange(n + 1) / n
    with np.errstate(invalid="ignore"):
        first = seq.value_ceil(left)
        last = seq.value_below(right)
        d1 = np.where(first < right, np.abs(level - first), np.nan)
        d2 = np.where(last >= left, np.abs(level - last), np.nan)
    both = np.fmax(d1, d2)
    out = np.nanmax(np.where(np.isnan(both), -np.inf, both), axis=1)
    return np.maximum(out, 0.0)


def _two_point_view(seq: ProbSeq, n: int) -> tuple[BlockView, float]:
    if seq.kind != "variance":
        raise ValidationError("two_point needs a sequence of kind 'variance'")
    view = seq.view()
    total = seq.seminorm(1.0)
    if not math.isfinite(total):
        raise ValidationError("two_point needs a finite sum of variances")
    if total == 0:
        return view, 0.0
    eta = math.sqrt(2 * n * total)
    pairs = [(b.log_count, b.q / eta**2) for b in view]
    return BlockView.from_pairs(pairs), eta


def _chunk_values(plan: SimPlan, chunk: int, m: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(plan.seed, spawn_key=(chunk,))))
    t = plan.target
    if isinstance(t, ProductSup):
        return _product_values(rng, plan.n, t, m)
    if isinstance(t, ProductNorm):
        return _norm_values(rng, plan.n, t, m)
    if isinstance(t, CdfSup):
        return cdf_sup_from_sorted(_sorted_uniforms(rng, plan.n, m), t.x0)
    if isinstance(t, CoupledSup):
        u = _sorted_uniforms(rng, plan.n, m)
        if t.interval:
            return cdf_sup_from_sorted(u, t.seq.value_at(1))
        return coupled_sup_from_sorted(u, t.seq)
    if isinstance(t, TwoPoint):
        view, eta = _two_point_view(t.seq, plan.n)
        if eta == 0:
            return np.zeros(m)
        return _product_values(rng, plan.n, ProductSup(view, "two_sided", "direct"), m, scale=eta)
    raise ValidationError(f"unknown target {type(t).__name__}")


def worker_count(requested: int | None = None) -> int:
    """Requested workers (default: CPU count), capped by DEVBOUND_THREADS when set."""
    workers = requested or os.cpu_count() or 1
    cap = os.environ.get("DEVBOUND_THREADS")
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ValidationError(f"DEVBOUND_THREADS must be an integer, got {cap!r}") from None
    return workers


def draw(plan: SimPlan) -> np.ndarray:
    """Per-trial values in trial order."""
    if isinstance(plan.target, TwoPoint):
        _two_point_view(plan.target.seq, plan.n)  # validate before spawning work
    sizes = [CHUNK_TRIALS] * (plan.trials // CHUNK_TRIALS)
    if plan.trials % CHUNK_TRIALS:
        sizes.append(plan.trials % CHUNK_TRIALS)
    workers = worker_count(plan.workers)
    if workers == 1 or len(sizes) == 1:
        parts = [_chunk_values(plan, c, m) for c, m in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda cm: _chunk_values(plan, *cm), enumerate(sizes)))
    return np.concatenate(parts)


def simulate(
    plan: SimPlan,
    levels: Sequence[float] = (0.5, 0.9, 0.99),
    thresholds: Sequence[float] = (),
    raw_path: str | Path | None = None,
) -> SimEstimate:
    values = draw(plan)
    if raw_path is not None:
        np.savetxt(raw_path, values, fmt="%.17g")
    est = summarize(values, levels, thresholds)
    return SimEstimate(est.mean, est.std_error, est.quantiles, est.tail_probs, est.trials, plan.seed, values)


def nearest_rank(sorted_values: np.ndarray, level: float) -> float:
    """Smallest sample x with at least ceil(level * N) samples <= x."""
    if not 0 <= level <= 1:
        raise ValidationError(f"quantile level must lie in [0, 1], got {level}")
    rank = max(1, math.ceil(level * sorted_values.size))
    return float(sorted_values[rank - 1])


def summarize(samples, levels: Sequence[float] = (0.5, 0.9, 0.99), thresholds: Sequence[float] = ()) -> SimEstimate:
    """Mean, standard error, nearest-rank quantiles and Wilson 95% exceedance intervals."""
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float)
    N = x.size
    if N < 2:
        raise ValidationError(f"need at least 2 samples, got {N}")
    mean = math.fsum(x.tolist()) / N
    var = math.fsum(((x - mean) ** 2).tolist()) / (N - 1)
    srt = np.sort(x)
    quantiles = {float(lv): nearest_rank(srt, lv) for lv in levels}
    tails = {}
    for thr in thresholds:
        k = int(np.count_nonzero(x > thr))
        ci = binomtest(k, N).proportion_ci(confidence_level=0.95, method="wilson")
        tails[float(thr)] = (k / N, float(ci.low), float(ci.high))
    return SimEstimate(mean, math.sqrt(var / N), quantiles, tails, N)
