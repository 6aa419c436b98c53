import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devbound.errors import RepresentabilityError, ResourceError, ValidationError
from devbound.oracle import exact_lq_moment, exact_sup_expectation, poisson_exact, sup_cdf, sup_quantile
from devbound.sequences import BlockView
from oracles import enumerate_sup, expectation


def view(*blocks):
    """Blocks given as (count, q)."""
    return BlockView.from_pairs([(math.log(c), q) for c, q in blocks])


@pytest.mark.parametrize(
    "blocks, n, expected",
    [([(1, 0.5)], 1, 0.5), ([(2, 0.5)], 1, 0.5), ([(1, 0.5)], 2, 0.25)],
)
def test_expectation_examples(blocks, n, expected):
    r = exact_sup_expectation(view(*blocks), n)
    assert r.value == pytest.approx(expected, abs=1e-15)
    assert r.side == "two_sided" and r.breakpoints_used >= 2


@pytest.mark.parametrize("side", ["two_sided", "upper", "lower"])
@pytest.mark.parametrize(
    "blocks, n",
    [
        ([(1, 0.3)], 5),
        ([(2, 0.4), (1, 0.1)], 4),
        ([(1, 0.5), (2, 0.2), (1, 0.05)], 3),
        ([(3, 0.01)], 6),
        ([(1, 0.37), (1, 0.2)], 7),
    ],
)
def test_expectation_matches_enumeration(blocks, n, side):
    ref = expectation(enumerate_sup(blocks, n, side))
    assert exact_sup_expectation(view(*blocks), n, side).value == pytest.approx(ref, abs=1e-13)


def test_cdf_matches_enumeration():
    blocks, n = [(1, 0.45), (2, 0.15)], 4
    dist = enumerate_sup(blocks, n, "two_sided")
    c = sup_cdf(view(*blocks), n)
    for t, F in zip(c.t, c.cdf):
        ref = sum(p for v, p in dist.items() if v <= t + 1e-12)
        assert F == pytest.approx(ref, abs=1e-13)
    assert np.allclose(c.cdf + c.survival, 1.0, atol=1e-15)


def test_quantile_examples():
    v = view((1, 0.5))
    assert sup_quantile(v, 2, 0.9) == 0.5
    assert sup_quantile(v, 2, 0.5) == 0.0
    assert sup_quantile(view((1, 0.3)), 4, 1 - 1e-12) == pytest.approx(0.7)
    with pytest.raises(ValidationError):
        sup_quantile(v, 2, 1.0)


@given(st.floats(0.01, 0.99))
@settings(max_examples=50, deadline=None)
def test_quantile_galois(level):
    v = view((3, 0.2), (5, 0.02))
    c = sup_cdf(v, 20)
    t = sup_quantile(v, 20, level)
    i = int(np.searchsorted(c.t, t))
    assert c.cdf[i] >= level
    assert i == 0 or c.cdf[i - 1] < level


blocks_strategy = st.lists(
    st.tuples(st.integers(1, 50), st.floats(1e-4, 0.5)), min_size=1, max_size=4
).map(lambda bs: sorted({q: c for c, q in bs}.items(), reverse=True))


@given(blocks_strategy, st.integers(1, 60))
@settings(max_examples=80, deadline=None)
def test_side_decomposition(qc, n):
    v = view(*[(c, q) for q, c in qc])
    two = exact_sup_expectation(v, n, "two_sided").value
    up = exact_sup_expectation(v, n, "upper").value
    low = exact_sup_expectation(v, n, "lower").value
    tol = 1e-12
    assert max(up, low) <= two + tol
    assert two <= up + low + tol
    assert 0 <= two <= 1


def test_huge_count_stable_and_monotone():
    prev = -1.0
    for lc in (10.0, 100.0, 1000.0, 5000.0, 1e4):
        r = exact_sup_expectation(BlockView.from_pairs([(lc, 0.05)]), 100, "upper")
        assert math.isfinite(r.value) and 0 <= r.value <= 0.95
        assert r.value >= prev
        prev = r.value
        c = sup_cdf(BlockView.from_pairs([(lc, 0.05)]), 100)
        assert np.all((c.cdf >= 0) & (c.cdf <= 1))
    assert r.log_domain_min == pytest.approx(100 * math.log(0.05), rel=1e-9)  # P(Y = n)


def test_lq_moment_examples():
    assert exact_lq_moment(view((1, 0.5)), 2, 1) == pytest.approx(0.25)
    assert exact_lq_moment(BlockView.from_pairs([(math.log(5), 0.0)]), 10, 3) == 0.0
    joint = exact_lq_moment(view((2, 0.3)), 7, 2.5)
    split = 2 * exact_lq_moment(view((1, 0.3)), 7, 2.5)
    assert joint == pytest.approx(split, rel=1e-14)
    with pytest.raises(RepresentabilityError):
        exact_lq_moment(BlockView.from_pairs([(100.0, 0.1)]), 5, 2)


def test_poisson_examples():
    p = poisson_exact(view((1, 0.5)), 1)
    assert (p.p_any_success, p.U, p.V) == pytest.approx((0.5, 0.5, 0.5))
    z = poisson_exact(BlockView.from_pairs([(2.0, 0.0)]), 3)
    assert (z.p_any_success, z.U, z.V) == (0.0, 0.0, 0.0)
    p = poisson_exact(view((10, 0.001)), 10)
    assert p.p_any_success == pytest.approx(1 - 0.999**100, rel=1e-13)
    assert p.p_any_success == pytest.approx(0.09521, abs=1e-5)


def test_resource_caps():
    with pytest.raises(ResourceError):
        exact_sup_expectation(view((1, 0.5)), 10**5 + 1)
    many = BlockView.from_pairs([(0.0, 0.5 / (i + 1)) for i in range(200)])
    with pytest.raises(ResourceError):
        exact_sup_expectation(many, 60_000)
    with pytest.raises(ValidationError):
        exact_sup_expectation(view((1, 0.5)), 3, "sideways")
