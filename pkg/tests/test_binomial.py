import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devbound.binomial import (
    BinomialSpec,
    abs_central_moment_exact,
    analytic_tail_bounds,
    bennett_h,
    binom_quantile,
    kl_bernoulli,
    log_upper_tail,
    psi_q,
)
from devbound.constants import DEFAULT_CONSTANTS, ConcentrationConstants
from devbound.errors import ResourceError, ValidationError
from oracles import mp_abs_moment, mp_kl, mp_upper_tail

# ---------------------------------------------------------------- examples


@pytest.mark.parametrize("k, expected", [(0, 1.0), (1, 0.75), (2, 0.25)])
def test_upper_tail_fair_pair(k, expected):
    assert log_upper_tail(BinomialSpec(2, 0.5), k) == pytest.approx(math.log(expected), abs=1e-15)


def test_upper_tail_empty():
    assert log_upper_tail(BinomialSpec(2, 0.5), 3) == -math.inf


@pytest.mark.parametrize(
    "n, p",
    [(1, 0.3), (10, 0.5), (50, 0.01), (200, 0.37), (1000, 1e-4), (1000, 0.5), (3000, 0.02)],
)
def test_upper_tail_matches_mpmath(n, p):
    spec = BinomialSpec(n, p)
    for k in sorted({0, 1, 2, n // 3, n // 2, int(n * p) + 1, n - 1, n}):
        ref = mp_upper_tail(n, p, k)
        if ref < 1e-300:
            continue
        got = math.exp(log_upper_tail(spec, k))
        assert abs(got - float(ref)) <= 1e-12 * float(ref), (n, p, k)


def test_upper_tail_deep_tail_log_space():
    # P(Y = n) = p^n, far below double range
    spec = BinomialSpec(100_000, 0.01)
    assert log_upper_tail(spec, 100_000) == pytest.approx(100_000 * math.log(0.01), rel=1e-12)


def test_degenerate_probabilities():
    assert log_upper_tail(BinomialSpec(5, 0.0), 0) == 0.0
    assert log_upper_tail(BinomialSpec(5, 0.0), 1) == -math.inf
    assert log_upper_tail(BinomialSpec(5, 1.0), 5) == 0.0


def test_spec_validation():
    with pytest.raises(ValidationError):
        BinomialSpec(0, 0.5)
    with pytest.raises(ValidationError):
        BinomialSpec(3, 1.5)


def test_kl_examples():
    assert kl_bernoulli(0.3, 0.3) == 0.0
    assert kl_bernoulli(1.0, 0.25) == pytest.approx(math.log(4), rel=1e-15)
    assert kl_bernoulli(0.5, 0.25) == pytest.approx(float(mp_kl(0.5, 0.25)), rel=1e-14)
    assert kl_bernoulli(0.5, 0.25) == pytest.approx(0.14384, abs=1e-5)


def test_kl_domain_error():
    with pytest.raises(ValidationError):
        kl_bernoulli(0.5, 0.0)
    with pytest.raises(ValidationError):
        kl_bernoulli(0.5, 1.0)


def test_tail_bounds_examples():
    assert analytic_tail_bounds(BinomialSpec(10, 0.2), 0.2).chernoff == 0.0
    tb = analytic_tail_bounds(BinomialSpec(100, 0.25), 0.5)
    assert tb.chernoff == pytest.approx(-100 * float(mp_kl(0.5, 0.25)), rel=1e-13)
    with pytest.raises(ValidationError):
        analytic_tail_bounds(BinomialSpec(10, 0.2), 0.05)  # p > q


def test_anti_window():
    # q below 1/n lies outside the anti-concentration window (needs p <= q, so p is small here)
    tb = analytic_tail_bounds(BinomialSpec(10, 0.02), 0.05)
    assert tb.anti is None
    tb = analytic_tail_bounds(BinomialSpec(10, 0.2), 0.5)
    c = DEFAULT_CONSTANTS
    assert tb.anti == pytest.approx(math.log(c.c0) - c.C_anti * 10 * kl_bernoulli(0.5, 0.2))


def test_bennett_formula():
    spec = BinomialSpec(50, 0.1)
    var = 0.09
    assert analytic_tail_bounds(spec, 0.3).bennett == pytest.approx(-50 * var * bennett_h(0.2 / var))


def test_moment_examples():
    assert abs_central_moment_exact(BinomialSpec(2, 0.5), 1) == pytest.approx(0.5, abs=1e-15)
    assert abs_central_moment_exact(BinomialSpec(1, 0.5), 2) == pytest.approx(0.25, abs=1e-15)
    assert abs_central_moment_exact(BinomialSpec(7, 0.0), 3) == 0.0


@pytest.mark.parametrize("n, p, q", [(10, 0.3, 1), (40, 0.05, 2.5), (100, 0.001, 4), (500, 0.5, 3)])
def test_moment_matches_mpmath(n, p, q):
    got = abs_central_moment_exact(BinomialSpec(n, p), q)
    assert got == pytest.approx(float(mp_abs_moment(n, p, q)), rel=1e-11)


def test_moment_validation():
    with pytest.raises(ValidationError):
        abs_central_moment_exact(BinomialSpec(5, 0.5), 0.5)
    with pytest.raises(ResourceError):
        abs_central_moment_exact(BinomialSpec(10**6 + 1, 0.5), 2)


def test_psi_examples():
    v = psi_q(BinomialSpec(100, 0.5), 2)
    assert (v.value, v.regime) == (pytest.approx(100.0), "subgaussian")
    v = psi_q(BinomialSpec(1000, 1e-6), 2)
    assert (v.value, v.regime) == (pytest.approx(1e-3), "poisson")
    # 0.001 lies below the poisson threshold 2/(100 e^2) = 0.00271, so the middle formula does not apply
    v = psi_q(BinomialSpec(100, 0.001), 2)
    assert (v.value, v.regime) == (pytest.approx(0.1), "poisson")
    v = psi_q(BinomialSpec(100, 0.005), 2)
    assert v.regime == "loggamma"
    assert v.value == pytest.approx((2 / math.log(4)) ** 2, rel=1e-14)


def test_psi_threshold_tie_goes_to_larger_p():
    assert psi_q(BinomialSpec(100, 0.01), 2).regime == "subgaussian"  # p = q/(2n) exactly


def test_quantile_examples():
    spec = BinomialSpec(2, 0.5)
    assert binom_quantile(spec, 0.0) == 0
    assert binom_quantile(spec, math.log(0.0625)) == 3
    assert binom_quantile(spec, math.log(0.5)) == 2


def test_constants_validation():
    with pytest.raises(ValidationError):
        ConcentrationConstants(c0=0.3)
    with pytest.raises(ValidationError):
        ConcentrationConstants(C_anti=0.5)
    with pytest.raises(ValidationError):
        DEFAULT_CONSTANTS.with_overrides(bogus=1.0)
    assert DEFAULT_CONSTANTS.with_overrides(c0=0.2).c0 == 0.2


# ---------------------------------------------------------------- invariants

specs = st.builds(
    BinomialSpec,
    st.integers(1, 400),
    st.floats(0.0, 1.0, allow_nan=False),
)


@given(specs)
@settings(max_examples=60, deadline=None)
def test_tail_monotone_with_fixed_ends(spec):
    tails = [log_upper_tail(spec, k) for k in range(spec.n + 2)]
    assert tails[0] == pytest.approx(0.0, abs=1e-14)
    assert tails[-1] == -math.inf
    assert all(a >= b for a, b in zip(tails, tails[1:]))


@given(st.integers(1, 500), st.floats(1e-4, 0.99), st.floats(0.0, 1.0))
@settings(max_examples=100, deadline=None)
def test_chernoff_dominates(n, p, u):
    q = p + u * (1 - p)
    k = math.ceil(n * q)
    assert log_upper_tail(BinomialSpec(n, p), k) <= -n * kl_bernoulli(q, p) + 1e-9


@given(specs, st.floats(-800.0, 0.0))
@settings(max_examples=100, deadline=None)
def test_quantile_galois(spec, t):
    k_star = binom_quantile(spec, t)
    for k in range(spec.n + 2):
        assert (log_upper_tail(spec, k) <= t) == (k >= k_star)


_GRID = np.linspace(0.0, 0.25, 51)[1:]


def _rel_le(a, b):
    return a <= b * (1 + 1e-12) + 1e-300


def test_kl_sandwich_grid():
    checked = 0
    for q in _GRID:
        for e in _GRID:
            qh = q * bennett_h(e / q)
            d = kl_bernoulli(q + e, q)
            if e >= 8 * q:
                checked += 1
                assert _rel_le(e / 2 * math.log(e / q), qh)
                assert _rel_le(qh, d)
                assert _rel_le(d, 2 * e * math.log(e / q))
            if q + e <= 0.5:
                assert _rel_le(e * e / (2 * (q + e)), qh)
                assert _rel_le(qh, d)
                assert _rel_le(d, e * e / q)
    assert checked > 100


def test_h_dominates_half_shift_kl():
    for q in np.linspace(0.0, 0.5, 51)[1:]:
        for e in np.linspace(0.0, 0.5, 51):
            assert _rel_le(kl_bernoulli(q + e / 2, q), q * bennett_h(e / q))


def test_kl_convex_along_shift():
    for q in np.linspace(0.01, 0.5, 25):
        for e in np.linspace(0.001, 0.1, 25):
            base = kl_bernoulli(q + e, q)
            for k in (1.0, 1.5, 2.0, 3.0, 5.0):
                if q + k * e < 1:
                    assert kl_bernoulli(q + k * e, q) >= k * base * (1 - 1e-12)


def _psi_grid(q):
    # fixed p values plus points spread across each regime window
    for n in (10, 30, 100, 300, 1000, 3000):
        lo, hi = q / (n * math.exp(q)), q / (2 * n)
        extra = [lo * (hi / lo) ** f for f in (0.0, 0.5, 0.99)] + [lo * 0.1, lo * 0.01]
        for p in [0.5, 0.2, 0.05, 1e-2, 1e-3, 1e-4, 1e-6, *extra]:
            if p <= 0.5:
                yield n, p


@pytest.mark.parametrize("q", [1, 2, 4])
def test_psi_sandwich(q):
    ratios, regimes = [], set()
    for n, p in _psi_grid(q):
        spec = BinomialSpec(n, p)
        ps = psi_q(spec, q)
        regimes.add(ps.regime)
        ratios.append(abs_central_moment_exact(spec, q) / ps.value)
    assert regimes == {"subgaussian", "loggamma", "poisson"}
    lo, hi = min(ratios), max(ratios)
    print(f"psi_{q}: c = {lo:.4g}, C = {hi:.4g}, C/c = {hi / lo:.4g} (limit {math.exp(3 * q):.4g})")
    assert hi / lo <= math.exp(3 * q)
