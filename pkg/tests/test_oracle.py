import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imprecise_poisson.errors import ValidationError
from imprecise_poisson.expectation import ConditioningPrefix, upper_expectation_finitary
from imprecise_poisson.oracle import (
    constant_rate_envelope,
    extract_policy,
    policy_simulate,
    precise_expectation,
)
from imprecise_poisson.paths import RateInterval
from imprecise_poisson.random_objects import (
    CappedCount,
    ConstantPayoff,
    FinitaryVariable,
    Indicator,
    NoJump,
    Table,
)
from imprecise_poisson.semigroup import SemigroupConfig

RATES = RateInterval(1.0, 2.0)
FAST = SemigroupConfig(tol=1e-5)
NO_JUMP = FinitaryVariable((1.0,), Indicator((0,)))


def test_envelope_examples():
    assert constant_rate_envelope(NO_JUMP, [1.0, 1.5, 2.0]) == pytest.approx(math.exp(-1), rel=1e-14)
    assert constant_rate_envelope(NO_JUMP, [1.5]) == pytest.approx(math.exp(-1.5), rel=1e-14)
    capped = FinitaryVariable((1.0,), CappedCount(30))
    assert constant_rate_envelope(capped, [0.5, 2.0]) == pytest.approx(2.0, abs=1e-12)
    assert constant_rate_envelope(capped, [0.5, 2.0], "lower") == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValidationError):
        constant_rate_envelope(capped, [])


def test_precise_expectation_multi_time():
    var = FinitaryVariable((0.5, 1.5), NoJump(0, 1))
    assert precise_expectation(var, 1.0) == pytest.approx(math.exp(-1), rel=1e-13)
    prefix = ConditioningPrefix(((0.5, 2),))
    assert precise_expectation(var, 2.0, prefix) == pytest.approx(math.exp(-2), rel=1e-13)
    two = FinitaryVariable((0.5, 1.0), CappedCount(40, slot=1, base=0))
    assert precise_expectation(two, 3.0) == pytest.approx(1.5, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=25, max_size=25))
def test_envelope_duality_and_domination(vals):
    var = FinitaryVariable((0.5, 1.0), Table(np.reshape(vals, (5, 5))))
    grid = [1.0, 1.25, 1.5, 1.75, 2.0]
    lower = constant_rate_envelope(var, grid, "lower")
    assert lower == -constant_rate_envelope(var.negated(), grid, "upper")
    engine = upper_expectation_finitary(var, RATES, cfg=FAST)
    assert constant_rate_envelope(var, grid) <= engine.value + engine.error_bound


def test_monotone_payoff_policy_is_upper_rate():
    policy = extract_policy(FinitaryVariable((1.0,), CappedCount(8)), RATES, 1e-2)
    assert policy.tables[0].all()
    assert policy(3, 0.5) == 2.0


def test_no_jump_policy():
    upper = extract_policy(NO_JUMP, RATES, 1e-2)
    assert not upper.tables[0][:, 0].any()
    assert upper.tables[0][:, 1:].all()
    lower = extract_policy(NO_JUMP, RATES, 1e-2, mode="lower")
    assert lower.tables[0][:, 0].all()
    assert lower.engine_value == pytest.approx(math.exp(-2), abs=1e-6)


def test_precise_interval_gives_constant_policy():
    policy = extract_policy(NO_JUMP, RateInterval.precise(1.3), 1e-2)
    rates = policy.rate(0, np.zeros((5, 0), dtype=np.int64), np.arange(5), np.full(5, 0.3))
    assert np.all(rates == 1.3)


def test_extract_policy_validation():
    with pytest.raises(ValidationError):
        extract_policy(NO_JUMP, RATES, 0.6)
    with pytest.raises(ValidationError):
        extract_policy(NO_JUMP, RATES, 1e-2, mode="sideways")


def test_simulate_examples():
    capped = FinitaryVariable((1.0,), CappedCount(30))
    policy = extract_policy(capped, RateInterval.precise(1.7), 1e-2)
    mean, ci = policy_simulate(capped, policy, 100_000, seed=0)
    assert abs(mean - 1.7) <= ci
    zero = extract_policy(NO_JUMP, RateInterval(0, 0), 1e-2)
    mean, ci = policy_simulate(NO_JUMP, zero, 1000, seed=1)
    assert mean == 1.0 and ci == 0.0
    with pytest.raises(ValidationError):
        policy_simulate(NO_JUMP, zero, 1, seed=1)


def test_simulate_reproducible():
    policy = extract_policy(NO_JUMP, RATES, 1e-2)
    assert policy_simulate(NO_JUMP, policy, 5000, seed=4) == policy_simulate(NO_JUMP, policy, 5000, seed=4)


@pytest.mark.slow
def test_upper_policy_attains_no_jump_value():
    policy = extract_policy(NO_JUMP, RATES, 1e-3)
    mean, ci = policy_simulate(NO_JUMP, policy, 1_000_000, seed=2)
    assert abs(mean - math.exp(-1)) <= ci


def test_two_time_policy_attains_engine_value():
    var = FinitaryVariable((0.5, 1.0), Table(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.3, 0.6, 0.2]])))
    policy = extract_policy(var, RATES, 1e-3, cfg=FAST)
    mean, ci = policy_simulate(var, policy, 400_000, seed=5)
    assert abs(mean - policy.engine_value) <= ci + policy.engine_error


def test_conditioned_policy():
    var = FinitaryVariable((0.5, 1.0), NoJump(0, 1))
    prefix = ConditioningPrefix(((0.5, 2),))
    policy = extract_policy(var, RATES, 1e-3, mode="lower", prefix=prefix, cfg=FAST)
    assert policy.engine_value == pytest.approx(math.exp(-1), abs=1e-5)
    mean, ci = policy_simulate(var, policy, 200_000, seed=6)
    assert abs(mean - math.exp(-1)) <= ci


def test_ci_honesty_for_precise_rate():
    var = FinitaryVariable((1.0,), Table([0.1, 0.9, 0.4, 0.7]))
    policy = extract_policy(var, RateInterval.precise(1.2), 1e-2)
    exact = precise_expectation(var, 1.2)
    assert policy.engine_value == pytest.approx(exact, abs=policy.engine_error + 1e-12)
    hits = 0
    for seed in range(100):
        mean, ci = policy_simulate(var, policy, 5000, seed=seed)
        hits += abs(mean - policy.engine_value) <= ci
    assert hits >= 98


def test_constant_payoff_simulates_exactly():
    var = FinitaryVariable((1.0,), ConstantPayoff(0.25))
    policy = extract_policy(var, RATES, 1e-2)
    mean, ci = policy_simulate(var, policy, 1000, seed=0)
    assert mean == 0.25 and ci == 0.0
