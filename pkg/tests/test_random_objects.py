import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imprecise_poisson.errors import HorizonError, ValidationError
from imprecise_poisson.paths import CountingPath, RateInterval, constant_policy, sample_path, stitch
from imprecise_poisson.random_objects import (
    BEYOND,
    CappedCount,
    CellDoubleJump,
    Constant,
    ConstantPayoff,
    FinitaryVariable,
    HitLevel,
    Indicator,
    Max,
    Min,
    NextJumpAfter,
    NoJump,
    Table,
    finitary_eval,
    measurability_check,
    payoff_from_json,
    stopping_time_eval,
)

P = CountingPath((0.3, 0.9), 1.0)


def test_beyond_orders_above_finite_times():
    assert 1e300 < BEYOND
    assert not BEYOND < 5.0
    assert min(0.5, BEYOND) == 0.5
    assert max(0.5, BEYOND) is BEYOND
    assert min(BEYOND, BEYOND) is BEYOND
    with pytest.raises(TypeError):
        BEYOND + 1


def test_stopping_time_examples():
    assert stopping_time_eval(Constant(0.5), P) == 0.5
    assert stopping_time_eval(HitLevel(1), P) == 0.3
    assert stopping_time_eval(NextJumpAfter(Constant(0.5)), P) == 0.9
    assert stopping_time_eval(HitLevel(3), P) is BEYOND
    assert stopping_time_eval(Constant(2.0), P) is BEYOND
    assert stopping_time_eval(NextJumpAfter(Constant(0.3)), P) == 0.9
    assert Min(HitLevel(2), Constant(0.5)).evaluate(P) == 0.5
    assert Max(HitLevel(2), Constant(0.5)).evaluate(P) == 0.9


def test_cell_double_jump():
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    sigma = CellDoubleJump(grid)
    assert sigma(P) is BEYOND
    assert sigma(CountingPath((0.55, 0.6, 0.8), 1.0)) == 0.6
    # a jump on the right end of a cell belongs to that cell
    assert sigma(CountingPath((0.3, 0.5), 1.0)) == 0.5
    assert sigma(CountingPath((0.25, 0.3), 1.0)) is BEYOND


def random_path(rng, horizon=3.0):
    times = np.unique(rng.uniform(0.0, horizon, size=rng.poisson(2.0 * horizon)))
    return CountingPath(tuple(times[times > 0]), horizon)


def agreeing_pairs(st_, rng, count=1000, horizon=3.0):
    pairs = []
    for _ in range(count):
        w1 = random_path(rng, horizon)
        v = st_.evaluate(w1)
        cut = horizon if v is BEYOND else v
        cut = min(cut, horizon)
        w2 = stitch(w1, cut, random_path(rng, horizon - cut)) if rng.random() < 0.8 else random_path(rng, horizon)
        pairs.append((w1, w2))
    return pairs


FAMILY = [
    Constant(1.0),
    HitLevel(2),
    NextJumpAfter(Constant(0.5)),
    NextJumpAfter(HitLevel(1)),
    Min(HitLevel(3), Constant(1.5)),
    Max(HitLevel(1), Constant(0.7)),
    Min(Max(HitLevel(1), Constant(0.2)), NextJumpAfter(Constant(1.0))),
    CellDoubleJump((0.0, 0.5, 1.0, 1.5, 2.0)),
]


@pytest.mark.parametrize("st_", FAMILY, ids=repr)
def test_measurability_of_builtin_family(st_):
    rng = np.random.default_rng(7)
    report = measurability_check(st_, agreeing_pairs(st_, rng))
    assert report.checked == 1000
    assert report.agreeing >= 700
    assert report.passed


class PeekAhead:
    """Looks 0.1 into the future: not a stopping time."""

    def evaluate(self, path):
        return path.jump_times[0] - 0.1 if path.jump_times else BEYOND


def test_measurability_check_flags_peek_ahead():
    w1 = CountingPath((0.5,), 1.0)
    w2 = CountingPath((0.45,), 1.0)
    report = measurability_check(PeekAhead(), [(w1, w2)])
    assert not report.passed
    assert len(report.violations) == 1


def test_hit_level_reaches_level():
    rng = np.random.default_rng(1)
    for _ in range(200):
        w = random_path(rng)
        for m in (1, 2, 4):
            v = HitLevel(m).evaluate(w)
            if v is not BEYOND:
                assert w(v) >= m
                assert w(v - 1e-12) < m or v <= 1e-12


def test_finitary_eval_examples():
    assert finitary_eval(FinitaryVariable((1.0,), ConstantPayoff(2.5)), P) == 2.5
    empty = CountingPath((), 1.0)
    assert finitary_eval(FinitaryVariable((1.0,), Indicator((0,))), empty) == 1.0
    var = FinitaryVariable((0.25, 0.75), CappedCount(10, slot=1, base=0))
    assert finitary_eval(var, CountingPath((0.5,), 1.0)) == 1.0
    with pytest.raises(HorizonError):
        finitary_eval(FinitaryVariable((2.0,), Indicator((0,))), P)


@settings(max_examples=100)
@given(st.lists(st.floats(0.01, 2.0), min_size=0, max_size=6, unique=True), st.floats(0.01, 1.0))
def test_finitary_eval_ignores_future(jumps, extra):
    w = CountingPath(tuple(sorted(jumps)), 2.0)
    var = FinitaryVariable((0.4, 1.1), Table(np.arange(16.0).reshape(4, 4)))
    other = stitch(w, 1.1, CountingPath((extra,), 0.9 + extra))
    assert finitary_eval(var, w) == finitary_eval(var, other)


def test_variable_validation_and_bound():
    with pytest.raises(ValidationError):
        FinitaryVariable((1.0, 0.5), Indicator((0,)))
    with pytest.raises(ValidationError):
        FinitaryVariable((1.0,), CappedCount(5), bound=1.0)
    v = FinitaryVariable((1.0,), Table([0.0, -3.0, 2.0]))
    assert v.bound == 3.0
    assert v.payoff.saturation == 2


@pytest.mark.parametrize(
    "payoff",
    [
        ConstantPayoff(1.5),
        Indicator((0, 2)),
        CappedCount(30),
        CappedCount(4, slot=1, base=0),
        NoJump(0, 1),
        Table(np.arange(9.0).reshape(3, 3)),
        Indicator((1,)).negated(),
    ],
    ids=lambda p: p.kind,
)
def test_payoff_json_roundtrip(payoff):
    data = json.loads(json.dumps(payoff.to_json()))
    back = payoff_from_json(data)
    grid = np.ix_(np.arange(6), np.arange(6))
    np.testing.assert_array_equal(
        np.broadcast_to(back(*grid), (6, 6)), np.broadcast_to(payoff(*grid), (6, 6))
    )


def test_variable_json_roundtrip():
    var = FinitaryVariable((0.5, 1.5), NoJump(0, 1))
    back = FinitaryVariable.from_json(json.dumps(var.to_json()))
    assert back.times == var.times
    assert back.bound == 1.0


def test_sampled_paths_have_valid_stopping_times():
    rates = RateInterval(1, 2)
    for seed in range(50):
        w = sample_path(constant_policy(2.0), 3.0, seed, rates)
        a = Min(HitLevel(2), Constant(1.0)).evaluate(w)
        b = Max(HitLevel(2), Constant(1.0)).evaluate(w)
        assert a <= b
