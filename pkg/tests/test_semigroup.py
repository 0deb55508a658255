import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imprecise_poisson.errors import BudgetError, ValidationError
from imprecise_poisson.paths import RateInterval
from imprecise_poisson.semigroup import (
    LOWER,
    UPPER,
    LatticeFunction,
    SemigroupConfig,
    generator_apply,
    poisson_pmf,
    precise_generator_apply,
    precise_semigroup_apply,
    semigroup_apply,
)

RATES = RateInterval(1.0, 2.0)
# a looser budget keeps the property tests fast
FAST = SemigroupConfig(tol=1e-5)


def tables(size=8):
    return st.lists(st.floats(-1.0, 1.0), min_size=size, max_size=size).map(LatticeFunction)


def test_precise_generator_examples():
    np.testing.assert_array_equal(precise_generator_apply(LatticeFunction([3.0] * 5), 2.0).values, 0.0)
    g = LatticeFunction.indicator(0, 4)
    np.testing.assert_array_equal(precise_generator_apply(g, 1.0).values, [-1, 0, 0, 0, 0])
    np.testing.assert_array_equal(precise_generator_apply(g, 0.0).values, 0.0)
    with pytest.raises(ValidationError):
        precise_generator_apply(g, -1.0)


def test_sublinear_generator_examples():
    g = LatticeFunction.indicator(0, 4)
    np.testing.assert_array_equal(generator_apply(g, RATES, UPPER).values, [-1, 0, 0, 0, 0])
    np.testing.assert_array_equal(generator_apply(g, RATES, LOWER).values, [-2, 0, 0, 0, 0])
    np.testing.assert_array_equal(generator_apply(LatticeFunction([1.0, 1.0]), RATES).values, 0.0)
    capped = LatticeFunction.capped(6)
    np.testing.assert_array_equal(generator_apply(capped, RATES).values, [2] * 6 + [0])


def test_semigroup_examples():
    g = LatticeFunction.indicator(0, 3)
    same = semigroup_apply(g, 0.0, RATES)
    np.testing.assert_array_equal(same.values, g.values)
    assert same.error_bound == 0.0
    const = semigroup_apply(LatticeFunction([0.7] * 6), 3.0, RATES)
    np.testing.assert_allclose(const.values, 0.7, rtol=0, atol=1e-15)
    res = semigroup_apply(g, 1.0, RATES)
    assert res.error_bound <= 1e-6
    assert abs(res[0] - math.exp(-1)) <= res.error_bound


def test_semigroup_reports_budget():
    with pytest.raises(BudgetError) as info:
        semigroup_apply(LatticeFunction.indicator(0, 3), 1.0, RATES, cfg=SemigroupConfig(tol=1e-9, max_steps=1000))
    assert info.value.required > 1000


@pytest.mark.parametrize(
    "mu, z, expected",
    [(0.0, 0, 1.0), (1.0, 0, math.exp(-1)), (2.0, 1, 0.2706705664732254), (0.0, 3, 0.0)],
)
def test_poisson_pmf(mu, z, expected):
    assert poisson_pmf(mu, z) == pytest.approx(expected, rel=1e-14, abs=0)


def test_poisson_pmf_sums_to_at_most_one():
    assert sum(poisson_pmf(3.7, z) for z in range(200)) <= 1.0 + 1e-15


def test_precise_semigroup_examples():
    g = LatticeFunction.indicator(0, 5)
    np.testing.assert_array_equal(precise_semigroup_apply(g, 0.0, 1.0).values, g.values)
    assert precise_semigroup_apply(g, 1.0, 1.0)[0] == pytest.approx(math.exp(-1), rel=1e-14)
    capped = LatticeFunction.capped(30)
    assert abs(precise_semigroup_apply(capped, 0.5, 2.0)[0] - 1.0) <= 1e-9


def test_absorbing_precise_semigroup_is_mass_preserving():
    ones = LatticeFunction([1.0] * 12)
    np.testing.assert_allclose(precise_semigroup_apply(ones, 4.0, 3.0).values, 1.0, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(tables(), st.floats(0.0, 1.0))
def test_euler_factor_is_monotone(g, bump):
    hi = LatticeFunction(g.values + bump * np.linspace(0, 1, g.values.size) ** 2)
    a = semigroup_apply(g, 0.05, RATES, cfg=SemigroupConfig(tol=1.0))
    b = semigroup_apply(hi, 0.05, RATES, cfg=SemigroupConfig(tol=1.0))
    # a single Euler step (theta-limited) preserves order exactly
    assert a.steps == b.steps == 1
    assert np.all(a.values <= b.values + 1e-15)


@settings(max_examples=30, deadline=None)
@given(tables(), tables(), st.floats(0.1, 1.0))
def test_sublinearity(g, h, delta):
    both = semigroup_apply(LatticeFunction(g.values + h.values), delta, RATES, cfg=FAST)
    a = semigroup_apply(g, delta, RATES, cfg=FAST)
    b = semigroup_apply(h, delta, RATES, cfg=FAST)
    assert np.all(both.values <= a.values + b.values + 2 * FAST.tol + both.error_bound)


@settings(max_examples=30, deadline=None)
@given(tables(), st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_homogeneity_and_constant_additivity(g, mu, c):
    base = semigroup_apply(g, 0.5, RATES, cfg=FAST)
    scaled = semigroup_apply(LatticeFunction(mu * g.values), 0.5, RATES, cfg=FAST)
    np.testing.assert_allclose(scaled.values, mu * base.values, rtol=0, atol=FAST.tol * max(1.0, mu))
    shifted = semigroup_apply(LatticeFunction(g.values + c), 0.5, RATES, cfg=FAST)
    np.testing.assert_allclose(shifted.values, base.values + c, rtol=0, atol=FAST.tol)


@settings(max_examples=30, deadline=None)
@given(tables(12), st.floats(0.1, 1.5))
def test_domination_of_precise_semigroups(g, delta):
    upper = semigroup_apply(g, delta, RATES, cfg=FAST)
    lower = semigroup_apply(g, delta, RATES, LOWER, cfg=FAST)
    for lam in (RATES.lower, 0.5 * (RATES.lower + RATES.upper), RATES.upper):
        exact = precise_semigroup_apply(g, delta, lam).values
        assert np.all(exact <= upper.values + FAST.tol)
        assert np.all(exact >= lower.values - FAST.tol)


def test_degenerate_interval_matches_precise():
    rng = np.random.default_rng(11)
    cfg = SemigroupConfig(tol=1e-6)
    for _ in range(100):
        lam = rng.uniform(0.2, 3.0)
        delta = rng.uniform(0.1, 1.0)
        g = LatticeFunction(rng.uniform(-1, 1, size=10))
        euler = semigroup_apply(g, delta, RateInterval.precise(lam), cfg=cfg)
        exact = precise_semigroup_apply(g, delta, lam)
        np.testing.assert_allclose(euler.values, exact.values, rtol=0, atol=cfg.tol)


@settings(max_examples=20, deadline=None)
@given(tables(), st.floats(0.1, 0.8), st.floats(0.1, 0.8))
def test_semigroup_law(g, d1, d2):
    whole = semigroup_apply(g, d1 + d2, RATES, cfg=FAST)
    inner = semigroup_apply(g, d2, RATES, cfg=FAST)
    outer = semigroup_apply(inner.function, d1, RATES, cfg=FAST)
    np.testing.assert_allclose(whole.values, outer.values, rtol=0, atol=3 * FAST.tol)


@settings(max_examples=30, deadline=None)
@given(tables(), st.floats(0.0, 1.0))
def test_lower_is_conjugate_bit_for_bit(g, delta):
    lower = semigroup_apply(g, delta, RATES, LOWER, cfg=FAST)
    upper = semigroup_apply(-g, delta, RATES, UPPER, cfg=FAST)
    np.testing.assert_array_equal(lower.values, -upper.values)
    assert lower.error_bound == upper.error_bound


def test_lattice_function_validation():
    with pytest.raises(ValidationError):
        LatticeFunction([1.0])
    with pytest.raises(ValidationError):
        LatticeFunction([0.0, math.inf])
    g = LatticeFunction([0.0, 1.0, 3.0])
    assert g.span == 3.0
    assert g(10) == 3.0
    np.testing.assert_array_equal(g.extended(5).values, [0, 1, 3, 3, 3, 3])
