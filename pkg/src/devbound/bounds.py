"""Closed-form rates for the expected sup-deviation and its companion bands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binomial import BinomialSpec, abs_central_moment_exact, binom_quantile, log_upper_tail, psi_q
from .constants import DEFAULT_CONSTANTS, ConcentrationConstants
from .errors import DivergenceError, ResourceError, ValidationError
from .sequences import BlockView, PowerLaw, ProbSeq, TruncationPolicy, log_expm1

# power-law suprema: every integer index up to this, then a geometric grid
_DENSE_LIMIT = 10**6
_GEOM_POINTS = 4000
_GEOM_MAX_LOG = 690.0  # ln of the largest grid index (stays inside double range)
MAX_LQ_TERMS = 10**7


def log1p_exp(x: float) -> float:
    """ln(1 + e^x)."""
    return float(np.logaddexp(0.0, x))


# ---------------------------------------------------------------- evaluation points


@dataclass(frozen=True)
class _Points:
    """Candidate indices for a supremum: ln(j+1), ln j and p(j) at each."""

    log_index: np.ndarray  # ln(j+1)
    log_j: np.ndarray
    q: np.ndarray


def _view_points(view: BlockView) -> _Points:
    L = view.end_log_indices
    return _Points(L, np.array([log_expm1(x) for x in L]), view.qs)


def _power_law_points(seq: PowerLaw) -> _Points:
    top = seq.cap_index if seq.cap_index is not None else math.inf
    dense = np.arange(1, int(min(top, _DENSE_LIMIT)) + 1, dtype=float)
    parts = [dense]
    if top > _DENSE_LIMIT:
        hi = min(math.log(top), _GEOM_MAX_LOG)
        geo = np.exp(np.linspace(math.log(_DENSE_LIMIT), hi, _GEOM_POINTS))[1:]
        if seq.cap_index is not None:
            geo = np.append(geo, float(seq.cap_index))
        parts.append(geo)
    j = np.concatenate(parts)
    log_j = np.log(j)
    q = np.minimum(seq.a * np.exp(-seq.b * log_j), 0.5)
    return _Points(np.log1p(j), log_j, q)


def _points(seq: ProbSeq) -> _Points:
    if isinstance(seq, PowerLaw):
        return _power_law_points(seq)
    return _view_points(seq.view())


# ---------------------------------------------------------------- S and T


@dataclass(frozen=True)
class Functionals:
    S: float
    T: float


def functional_S_T(seq: ProbSeq) -> Functionals:
    """S = sup p(j) ln(j+1) and T = sup ln(j+1)/ln(1/p(j)).

    Both terms increase with j inside a constant block, so block right ends suffice.
    Zero entries contribute nothing.
    """
    pts = _points(seq)
    pos = pts.q > 0
    if not pos.any():
        return Functionals(0.0, 0.0)
    L, q = pts.log_index[pos], pts.q[pos]
    S = float(np.max(q * L))
    T = float(np.max(L / -np.log(q)))
    if isinstance(seq, PowerLaw) and seq.cap_index is None:
        T = max(T, 1.0 / seq.b)  # limit of ln(j+1)/(b ln j - ln a)
    return Functionals(S, T)


# ---------------------------------------------------------------- phi


@dataclass(frozen=True)
class PhiValue:
    value: float
    regime: str  # constant | subgamma | subgaussian | extended | zero


def phi(logJ: float, q: float, n: int) -> PhiValue:
    """Three-regime step rate, extended to J in (0, 1) by e^{-1/J} sqrt(q/n).

    At an exact threshold the later (larger-n) regime wins.  When q is large
    enough that the first and last windows overlap, the first matching case
    in the order constant, subgaussian, subgamma is used.
    """
    if not 0.0 <= q <= 0.5:
        raise ValidationError(f"q must lie in [0, 1/2], got {q}")
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if math.isnan(logJ) or logJ == -math.inf:
        raise ValidationError(f"logJ must be a real number, got {logJ}")
    if q == 0.0:
        return PhiValue(0.0, "zero")
    if logJ < 0:
        return PhiValue(math.exp(-math.exp(-logJ)) * math.sqrt(q / n), "extended")
    L = log1p_exp(logJ)
    if n < L / -math.log(q):
        return PhiValue(1.0, "constant")
    if n >= L / (math.e * q):
        return PhiValue(math.sqrt(q * L / n), "subgaussian")
    return PhiValue(L / (n * (math.log(L) - math.log(n) - math.log(q))), "subgamma")


# ---------------------------------------------------------------- tail quantile epsilon


@dataclass(frozen=True)
class EpsilonResult:
    epsilon: float
    threshold_grid_point: float
    degenerate: bool


def epsilon_exact(
    logJ: float, q: float, n: int, consts: ConcentrationConstants = DEFAULT_CONSTANTS
) -> EpsilonResult:
    """Smallest grid deviation t - q (t = k/n >= q) with P(Y >= k+1) <= c0/(2J)."""
    if not 0.0 < q <= 0.5:
        raise ValidationError(f"q must lie in (0, 1/2], got {q}")
    if not logJ >= 0:
        raise ValidationError(f"logJ must be >= 0, got {logJ}")
    spec = BinomialSpec(n, q)
    target = math.log(consts.c0) - math.log(2.0) - logJ
    if log_upper_tail(spec, 1) <= target:
        return EpsilonResult(-q, 0.0, True)
    k = math.ceil(n * q)
    if (k - 1) / n >= q:
        k -= 1
    elif k / n < q:
        k += 1
    k = max(k, binom_quantile(spec, target) - 1)
    return EpsilonResult(k / n - q, k / n, False)


# ---------------------------------------------------------------- main rate


@dataclass(frozen=True)
class BoundReport:
    rate: float
    regime: str  # constant | subgamma | subgaussian | poissonian
    argmax_log_index: float | None
    S: float
    T: float
    components: dict[float, tuple[float, float]] = field(default_factory=dict)
    bracket: tuple[float, float] | None = None
    notes: tuple[str, ...] = ()


def _rate_terms(L: np.ndarray, q: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """sqrt(q L / n) and L / (n ln(2 + L/(n q))) elementwise, zero where q = 0."""
    sq = np.zeros_like(L)
    lg = np.zeros_like(L)
    pos = q > 0
    Lp, qp = L[pos], q[pos]
    sq[pos] = np.sqrt(qp * Lp / n)
    lg[pos] = Lp / (n * np.logaddexp(math.log(2.0), np.log(Lp) - math.log(n) - np.log(qp)))
    return sq, lg


def _poissonian(pts: _Points, n: int, scale: float = 1.0, strict: bool = False) -> bool:
    """Whether p(j) <= scale/(2 n j) (or < when strict) at every candidate index."""
    pos = pts.q > 0
    if not pos.any():
        return True
    lhs = np.log(pts.q[pos])
    bound = math.log(scale) - math.log(2 * n) - pts.log_j[pos]
    return bool(np.all(lhs < bound)) if strict else bool(np.all(lhs <= bound))


def _poissonian_seq(seq: ProbSeq, n: int, scale: float = 1.0, strict: bool = False) -> bool:
    if isinstance(seq, PowerLaw):
        # p(j) j = a j^{1-b} away from the plateau: worst j is 1 for b >= 1, the last index otherwise
        if seq.b < 1 and seq.cap_index is None:
            return False
        worst = max(1, seq.plateau_end) if seq.b >= 1 else seq.cap_index
        lhs, rhs = seq.value_at(worst) * worst, scale / (2 * n)
        return lhs < rhs if strict else lhs <= rhs
    return _poissonian(_view_points(seq.view()), n, scale, strict)


def _sup_report(view: BlockView, n: int) -> tuple[float, str, float | None, dict[float, tuple[float, float]]]:
    pts = _view_points(view)
    sq, lg = _rate_terms(pts.log_index, pts.q, n)
    comps = {float(L): (float(a), float(b)) for L, a, b in zip(pts.log_index, sq, lg)}
    if not len(sq):
        return 0.0, "subgaussian", None, comps
    best = np.maximum(sq, lg)
    i = int(np.argmax(best))
    raw = float(best[i])
    if raw == 0.0:
        return 0.0, "subgaussian", None, comps
    if raw >= 1.0:
        regime = "constant"
    else:
        regime = "subgaussian" if sq[i] >= lg[i] else "subgamma"
    return min(1.0, raw), regime, float(pts.log_index[i]), comps


def _nonpoissonian_report(seq: ProbSeq, n: int, ST: Functionals) -> BoundReport:
    if isinstance(seq, PowerLaw):
        upper, lower = seq.blocks(TruncationPolicy(n=n))
        rate, regime, arg, comps = _sup_report(upper, n)
        lo = _sup_report(lower, n)[0]
        notes = ()
        if seq.cap_index is None:
            # the log term tends to 1/(n b) along the untruncated tail
            lim = min(1.0, 1.0 / (n * seq.b))
            if lim > rate:
                rate, regime, arg = lim, "subgamma", math.inf
                notes = ("supremum attained only in the limit j -> infinity",)
        return BoundReport(rate, regime, arg, ST.S, ST.T, comps, (lo, rate), notes)
    rate, regime, arg, comps = _sup_report(seq.view(), n)
    return BoundReport(rate, regime, arg, ST.S, ST.T, comps)


def delta_rate(seq: ProbSeq, n: int) -> BoundReport:
    """Order of magnitude of E sup_j |p_hat(j) - p(j)| from n samples."""
    _check_n(n)
    ST = functional_S_T(seq)
    if _poissonian_seq(seq, n):
        total = seq.seminorm(1.0)
        notes = () if math.isfinite(total) else ("sum of p(j) diverges; rate is the 1/n cap",)
        return BoundReport(min(1.0 / n, total), "poissonian", None, ST.S, ST.T, notes=notes)
    return _nonpoissonian_report(seq, n, ST)


def cohen_from_functionals(S: float, T: float, n: int, c: float = 1.0) -> float:
    """c (sqrt(S/n) + T ln(n)/n), valid for n >= e^3."""
    _check_n(n)
    if n < 21:
        raise ValidationError(f"n must be >= 21 (e^3), got {n}")
    if not c > 0:
        raise ValidationError(f"c must be > 0, got {c}")
    if math.isinf(T):
        raise DivergenceError("T is infinite; the bound is vacuous")
    return c * (math.sqrt(S / n) + T * math.log(n) / n)


def cohen_bound(seq: ProbSeq, n: int, c: float = 1.0) -> float:
    ST = functional_S_T(seq)
    return cohen_from_functionals(ST.S, ST.T, n, c)


@dataclass(frozen=True)
class Band:
    lower: float
    upper: float


def correlated_band(seq: ProbSeq, n: int) -> Band:
    """Range of E sup-deviation over all couplings with the given marginals."""
    if seq.kind != "mean":
        raise ValidationError("correlated_band needs a sequence of kind 'mean'")
    _check_n(n)
    p1 = seq.value_at(1)
    report = delta_rate(seq, n)
    lower = p1 if report.regime == "poissonian" else min(p1, math.sqrt(p1 / n))
    return Band(lower, report.rate)


def variance_rate(seq: ProbSeq, n: int) -> BoundReport:
    """Worst-case rate over [0,1]-valued coordinates with the given variances."""
    if seq.kind != "variance":
        raise ValidationError("variance_rate needs a sequence of kind 'variance'")
    _check_n(n)
    ST = functional_S_T(seq)
    if _poissonian_seq(seq, n):
        total = seq.seminorm(1.0)
        if not math.isfinite(total):
            raise DivergenceError("sum of variances diverges")
        return BoundReport(min(1.0 / n, math.sqrt(total / n)), "poissonian", None, ST.S, ST.T)
    return _nonpoissonian_report(seq, n, ST)


# ---------------------------------------------------------------- l_q band


@dataclass(frozen=True)
class LqBand:
    converges: bool
    lower: float
    upper: float
    asymptotic_rate: float | None
    jensen_lower: float | None = None  # (sum_j (E|p_hat - p|)^q)^{1/q}, exact when computed


def _lq_terms(seq: ProbSeq, n: int) -> tuple[np.ndarray, np.ndarray, float]:
    """(values, multiplicities, tail mass) covering the sequence.

    The tail mass is sum p(j) over indices deep in the Poisson regime, which
    are not enumerated (power_law only).
    """
    if isinstance(seq, PowerLaw):
        # enumerate while p(j) >= 1/(n e^8); beyond that every psi term is n p
        cut = int(seq._index_at_least(np.array([1.0 / (n * math.exp(8.0))]))[0])
        if seq.cap_index is None and seq.b <= 1:
            return np.array([]), np.array([]), math.inf
        if cut > MAX_LQ_TERMS:
            raise ResourceError(f"power_law needs {cut} explicit terms (cap {MAX_LQ_TERMS})")
        j = np.arange(1, cut + 1, dtype=float)
        vals = np.minimum(seq.a * j ** (-seq.b), 0.5)
        return vals, np.ones_like(vals), seq._tail_sum(1.0, cut + 1)
    view = seq.view()
    counts = np.array(view.integer_counts(), dtype=float)
    return view.qs, counts, 0.0


def lq_band(seq: ProbSeq, n: int, qnorm: float) -> LqBand:
    """Two-sided order of E ||p_hat - p||_q (up to q-dependent constants)."""
    _check_n(n)
    if not qnorm >= 1:
        raise ValidationError(f"qnorm must be >= 1, got {qnorm}")
    if not seq.is_summable():
        return LqBand(False, math.inf, math.inf, None)
    vals, mult, tail = _lq_terms(seq, n)
    big = vals >= 1.0 / n
    head = float(np.sum(mult[big] * vals[big] ** (qnorm / 2)))
    small_q = float(np.sum(mult[~big] * vals[~big] ** qnorm))
    if isinstance(seq, PowerLaw):
        start = len(vals) + 1
        small_q += seq._tail_sum(qnorm, start)
    lower = head ** (1 / qnorm) / math.sqrt(n) + small_q ** (1 / qnorm)
    psi_sum = 0.0
    for v, m in zip(vals, mult):
        if v > 0:
            psi_sum += m * psi_q(BinomialSpec(n, float(v)), qnorm).value
    psi_sum += n * tail
    upper = float((psi_sum / n**qnorm) ** (1 / qnorm))
    rate = None
    if qnorm >= 2:
        rate = seq.seminorm(qnorm / 2) ** (1 / qnorm) / math.sqrt(n)
    jensen = None
    if not isinstance(seq, PowerLaw):
        first = sum(
            m * (abs_central_moment_exact(BinomialSpec(n, float(v)), 1.0) / n) ** qnorm
            for v, m in zip(vals, mult)
            if v > 0
        )
        jensen = float(first ** (1 / qnorm))
    return LqBand(True, lower, upper, rate, jensen)


# ---------------------------------------------------------------- high probability


@dataclass(frozen=True)
class HpBand:
    gamma: float
    upper: float
    lower: float
    poissonian_flag: bool
    mcdiarmid_width: float


def mcdiarmid_width(n: int, gamma: float) -> float:
    """Deviation of the sup around its mean exceeded with probability <= gamma."""
    _check_n(n)
    if not 0 < gamma < 1:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    return math.sqrt(math.log(2 / gamma) / (2 * n))


def _sup_phi(pts: _Points, shift: float, n: int) -> float:
    """sup over candidate indices of phi(ln j + shift, p(j), n)."""
    best = 0.0
    for lj, q in zip(pts.log_j, pts.q):
        if q > 0:
            best = max(best, phi(float(lj) + shift, float(q), n).value)
    return best


def hp_band(
    seq: ProbSeq, n: int, gamma: float, consts: ConcentrationConstants = DEFAULT_CONSTANTS
) -> HpBand:
    """(1-gamma)-quantile band: upper scales indices by 1/gamma, lower by 1/ln(1/gamma)."""
    _check_n(n)
    if not 0 < gamma < 0.5:
        raise ValidationError(f"gamma must lie in (0, 1/2), got {gamma}")
    if isinstance(seq, PowerLaw):
        upper_view, _ = seq.blocks(TruncationPolicy(n=n))
        pts = _view_points(upper_view)
    else:
        pts = _view_points(seq.view())
    flag = _poissonian_seq(seq, n, scale=gamma, strict=True)
    upper = consts.hp_a1 * _sup_phi(pts, -math.log(gamma), n)
    lower = consts.hp_a2 * _sup_phi(pts, -math.log(math.log(1 / gamma)), n)
    return HpBand(gamma, upper, lower, flag, mcdiarmid_width(n, gamma))


# ---------------------------------------------------------------- localized DKW


def local_dkw_tail(
    n: int, V: float, t: float, consts: ConcentrationConstants = DEFAULT_CONSTANTS
) -> float:
    """ln of c1 exp(-c2 min(t^2, t sqrt(nV))), capped at ln 1."""
    _check_n(n)
    if not 0 < V <= 0.25:
        raise ValidationError(f"V must lie in (0, 1/4], got {V}")
    if not t >= 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    return min(0.0, math.log(consts.dkw_c1) - consts.dkw_c2 * min(t * t, t * math.sqrt(n * V)))


def _check_n(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")


__all__ = [
    "Band",
    "BoundReport",
    "EpsilonResult",
    "Functionals",
    "HpBand",
    "LqBand",
    "PhiValue",
    "cohen_bound",
    "cohen_from_functionals",
    "correlated_band",
    "delta_rate",
    "epsilon_exact",
    "functional_S_T",
    "hp_band",
    "local_dkw_tail",
    "lq_band",
    "mcdiarmid_width",
    "phi",
    "variance_rate",
]
