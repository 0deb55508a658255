"""Conditional upper and lower expectations.

Finitary variables are priced by backward induction over their time
points: the value as a function of the counts observed so far is pushed
back through the sublinear semigroup one interval at a time.  Errors from
the Euler scheme add up across layers because every layer is
nonexpansive in the sup norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import BudgetError, ValidationError
from .paths import RateInterval
from .random_objects import FinitaryVariable
from .semigroup import LOWER, UPPER, LatticeFunction, SemigroupConfig, _check_mode, apply_rows


@dataclass(frozen=True)
class ConditioningPrefix:
    """Counts observed at the first time points of a variable."""

    observed: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        obs = tuple((float(t), int(n)) for t, n in self.observed)
        for (t0, n0), (t1, n1) in zip(obs, obs[1:]):
            if t1 <= t0:
                raise ValidationError("prefix times must be strictly increasing")
            if n1 < n0:
                raise ValidationError("prefix counts must be nondecreasing")
        if obs and (obs[0][0] < 0 or obs[0][1] < 0):
            raise ValidationError("prefix must start from a nonnegative time and count")
        if obs and obs[0][0] == 0 and obs[0][1] != 0:
            raise ValidationError("the count at time 0 is 0")
        object.__setattr__(self, "observed", obs)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.observed)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(n for _, n in self.observed)

    def __len__(self):
        return len(self.observed)

    @classmethod
    def from_json(cls, data) -> "ConditioningPrefix":
        return cls(tuple((float(t), int(n)) for t, n in data or ()))


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    error_bound: float
    mode: str = UPPER

    def to_json(self) -> dict:
        return {"value": self.value, "error_bound": self.error_bound, "mode": self.mode}


# ---------------------------------------------------------------- closed forms


def expected_increment_bounds(s: float, t: float, rates: RateInterval) -> tuple[float, float]:
    """Lower and upper expected increment of the count over ``[s, t]``."""
    if s > t:
        raise ValidationError("need s <= t")
    return rates.lower * (t - s), rates.upper * (t - s)


def renewal_time_bounds(rates: RateInterval) -> tuple[float, float]:
    """Lower and upper expected waiting time until the next jump (``1/0 = inf``)."""

    def inv(x):
        return math.inf if x == 0 else 1.0 / x

    return inv(rates.upper), inv(rates.lower)


def no_jump_upper_prob(delta: float, rates: RateInterval) -> float:
    if delta < 0:
        raise ValidationError("delta must be nonnegative")
    return math.exp(-delta * rates.lower)


def jump_count_tail_bound(delta: float, m: int, rates: RateInterval) -> float:
    """Bound on the upper probability of at least ``m`` jumps within ``delta``."""
    if m < 1 or delta < 0:
        raise ValidationError("need m >= 1 and delta >= 0")
    return min(1.0, rates.upper * delta / m)


def _tail_upper_prob(delta: float, m: int, rates: RateInterval) -> float:
    # {increment >= m} is nondecreasing in the count, so the upper rate is
    # selected in every state and the upper probability is a Poisson tail.
    return min(jump_count_tail_bound(delta, m, rates), float(stats.poisson.sf(m - 1, rates.upper * delta)))


def lattice_size(start: int, mass: float, saturation: int | None, cfg: SemigroupConfig) -> int:
    if saturation is not None:
        return max(int(saturation), start, 1)
    return start + math.ceil(mass) + math.ceil(cfg.sigma_width * math.sqrt(mass)) + cfg.lattice_pad


def truncation_bound(var_span: float, start: int, n_max: int, delta: float, rates: RateInterval) -> float:
    return var_span * _tail_upper_prob(delta, n_max - start + 1, rates)


# ------------------------------------------------------------ the engine


def _prepare(var: FinitaryVariable, prefix: ConditioningPrefix | None):
    prefix = prefix or ConditioningPrefix()
    j = len(prefix)
    if j > var.k:
        raise ValidationError("prefix is longer than the variable's time list")
    if not np.allclose(prefix.times, var.times[:j], rtol=0, atol=1e-12):
        raise ValidationError("prefix times must be the first time points of the variable")
    start_time = prefix.times[-1] if j else 0.0
    start_state = prefix.counts[-1] if j else 0
    return prefix, j, start_time, start_state


def _induction(var, rates, prefix, cfg, mode, record=None):
    """Backward induction shared by the engine and policy extraction.

    ``record(slot, rows, first, delta)`` may run the semigroup itself and
    return ``(result, bound)``; by default :func:`apply_rows` is used.
    """
    prefix, j, start_time, start_state = _prepare(var, prefix)
    if j == var.k:
        value = float(var.payoff(*[np.asarray(n) for n in prefix.counts]))
        return value, 0.0, None
    horizon = var.times[-1] - start_time
    n_max = lattice_size(start_state, rates.upper * horizon, var.payoff.saturation, cfg)
    err = 0.0
    if var.payoff.saturation is None or var.payoff.saturation > n_max:
        err = truncation_bound(var.payoff.span(), start_state, n_max, horizon, rates)
        if err > cfg.tol:
            raise BudgetError(f"lattice truncation bound {err:.3g} exceeds tol {cfg.tol:.3g}")
    states = np.arange(n_max + 1)
    free = var.k - j
    grids = np.ix_(*[states] * free)
    counts = [np.asarray(n) for n in prefix.counts] + list(grids)
    values = np.array(np.broadcast_to(var.payoff(*counts), (n_max + 1,) * free), dtype=float)
    # states below the conditioning count are unreachable
    for slot in range(var.k - 1, j, -1):
        delta = var.times[slot] - var.times[slot - 1]
        lead = values.shape[:-1]
        rows = values.reshape(-1, n_max + 1)
        first = np.maximum(np.unravel_index(np.arange(rows.shape[0]), lead)[-1], start_state)
        if record is None:
            out, bound, _ = apply_rows(rows, delta, rates, mode, cfg, first)
        else:
            out, bound = record(slot, rows, first, delta)
        err += bound
        values = np.diagonal(out.reshape(lead + (n_max + 1,)), axis1=-2, axis2=-1).copy()
    delta = var.times[j] - start_time
    first = np.array([start_state])
    if record is None:
        out, bound, _ = apply_rows(values[None, :], delta, rates, mode, cfg, first)
    else:
        out, bound = record(j, values[None, :], first, delta)
    err += bound
    return float(out[0, start_state]), err, n_max


def upper_expectation_finitary(
    var: FinitaryVariable,
    rates: RateInterval,
    prefix: ConditioningPrefix | None = None,
    cfg: SemigroupConfig | None = None,
) -> ExpectationResult:
    """Conditional upper expectation of a bounded finitary variable."""
    cfg = cfg or SemigroupConfig()
    value, err, _ = _induction(var, rates, prefix, cfg, UPPER)
    return ExpectationResult(value, err, UPPER)


def lower_expectation_finitary(
    var: FinitaryVariable,
    rates: RateInterval,
    prefix: ConditioningPrefix | None = None,
    cfg: SemigroupConfig | None = None,
) -> ExpectationResult:
    upper = upper_expectation_finitary(var.negated(), rates, prefix, cfg)
    return ExpectationResult(-upper.value, upper.error_bound, LOWER)


def expectation_finitary(var, rates, prefix=None, cfg=None, mode: str = UPPER) -> ExpectationResult:
    _check_mode(mode)
    fn = upper_expectation_finitary if mode == UPPER else lower_expectation_finitary
    return fn(var, rates, prefix, cfg)


def conditional_markov(
    g: LatticeFunction,
    state: int,
    delta: float,
    rates: RateInterval,
    cfg: SemigroupConfig | None = None,
    mode: str = UPPER,
) -> ExpectationResult:
    """Upper (or lower) expectation of ``g(n + N_delta)`` from count ``state``.

    The same value applies at any (stopping) time at which the count equals
    ``state``; how that state was reached is irrelevant.
    """
    cfg = cfg or SemigroupConfig()
    if state < 0 or state > g.n_max:
        raise ValidationError(f"state {state} outside the lattice 0..{g.n_max}")
    first = np.array([state])
    out, bound, _ = apply_rows(g.values[None, :], delta, rates, mode, cfg, first)
    return ExpectationResult(float(out[0, state]), bound, mode)
