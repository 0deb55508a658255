"""Independent checks on the expectation engine.

* :func:`constant_rate_envelope` prices a variable exactly for each fixed
  rate by summing against Poisson increments (scipy pmf, forward in time),
  then takes the max or min over a grid of rates.  Every such value is a
  lower bound for the upper expectation.
* :func:`extract_policy` records which rate wins each step of the Euler
  recursion and :func:`policy_simulate` replays that bang-bang policy by
  thinning, giving a Monte-Carlo estimate the engine value should match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ValidationError
from .expectation import ConditioningPrefix, _induction
from .paths import RateInterval, sample_counts
from .random_objects import FinitaryVariable
from .semigroup import LOWER, UPPER, SemigroupConfig, _check_mode, _euler_upper_record


def _increment_pmf(mu: float, eps: float) -> np.ndarray:
    """Poisson(mu) pmf over ``0..z_max`` where the omitted tail is below ``eps``."""
    if mu == 0:
        return np.ones(1)
    z_max = int(stats.poisson.isf(eps, mu)) + 1
    return stats.poisson.pmf(np.arange(z_max + 1), mu)


def precise_expectation(var: FinitaryVariable, rate: float, prefix: ConditioningPrefix | None = None, eps: float = 1e-15) -> float:
    """Expectation of ``var`` for the precise Poisson process with ``rate``.

    Enumerates increments over successive intervals; the dropped tail
    mass per interval is below ``eps``.
    """
    prefix = prefix or ConditioningPrefix()
    j = len(prefix)
    t0 = prefix.times[-1] if j else 0.0
    n0 = prefix.counts[-1] if j else 0
    gaps = np.diff(np.concatenate([[t0], var.times[j:]]))
    pmfs = [_increment_pmf(rate * g, eps) for g in gaps]
    # joint distribution of the counts, built one interval at a time
    counts = [np.asarray(c) for c in prefix.counts]
    weight = np.ones(())
    level = np.asarray(n0)
    for pmf in pmfs:
        z = np.arange(pmf.size).reshape((1,) * weight.ndim + (-1,))
        level = level[..., None] + z
        weight = weight[..., None] * pmf.reshape(z.shape)
        counts = [c[..., None] if c.ndim else c for c in counts] + [level]
    values = np.broadcast_to(var.payoff(*counts), weight.shape)
    return math.fsum((values * weight).ravel())


def constant_rate_envelope(var: FinitaryVariable, grid, mode: str = UPPER, prefix: ConditioningPrefix | None = None) -> float:
    """Max (upper) or min (lower) of the precise expectations over ``grid``."""
    _check_mode(mode)
    grid = list(grid)
    if not grid:
        raise ValidationError("rate grid is empty")
    if mode == LOWER:
        return -constant_rate_envelope(var.negated(), grid, UPPER, prefix)
    return max(precise_expectation(var, lam, prefix) for lam in grid)


@dataclass(frozen=True, eq=False)
class RatePolicy:
    """Bang-bang rate decisions per time segment.

    Segment ``j`` covers ``(times[j-1], times[j]]`` and is cut into buckets
    of width ``steps[j]``.  ``tables[j][c_1, ..., c_j, b, n]`` is True when
    the upper rate applies in bucket ``b`` at count ``n`` given the counts
    ``c_1..c_j`` observed at earlier time points.
    """

    times: tuple[float, ...]
    start_time: float
    tables: tuple[np.ndarray, ...]
    steps: tuple[float, ...]
    rates: RateInterval
    mode: str
    engine_value: float
    engine_error: float
    observed: tuple[int, ...] = ()

    @property
    def n_max(self) -> int:
        return self.tables[0].shape[-1] - 1

    def rate(self, segment: int, earlier, n, s):
        """Vectorized rate lookup; ``s`` is time since the segment start."""
        table = self.tables[segment]
        buckets = table.shape[-2]
        b = np.minimum((np.asarray(s) / self.steps[segment]).astype(np.int64), buckets - 1)
        n = np.minimum(np.asarray(n), self.n_max)
        earlier = np.minimum(np.asarray(earlier, dtype=np.int64), self.n_max)
        idx = tuple(earlier[..., i] for i in range(earlier.shape[-1])) + (b, n)
        return np.where(table[idx], self.rates.upper, self.rates.lower)

    def __call__(self, n: int, t: float) -> float:
        """Scalar form for a single-segment policy, usable by ``sample_path``."""
        if len(self.tables) != 1 or self.tables[0].ndim != 2:
            raise ValidationError("scalar calls need a single-segment policy")
        s = max(0.0, min(t, self.times[0]) - self.start_time)
        return float(self.rate(0, np.zeros((0,), dtype=np.int64), n, s))


def extract_policy(
    var: FinitaryVariable,
    rates: RateInterval,
    h: float,
    mode: str = UPPER,
    prefix: ConditioningPrefix | None = None,
    cfg: SemigroupConfig | None = None,
) -> RatePolicy:
    """Run the Euler recursion with step at most ``h`` and record the rate choices.

    Ties (zero forward difference) go to the upper rate in upper mode and to
    the lower rate in lower mode.
    """
    _check_mode(mode)
    if h <= 0 or h * rates.upper > 1:
        raise ValidationError("need 0 < h and h * upper <= 1")
    cfg = cfg or SemigroupConfig()
    prefix = prefix or ConditioningPrefix()
    j0 = len(prefix)
    sign = 1.0 if mode == UPPER else -1.0
    work = var if mode == UPPER else var.negated()
    tables: dict[int, np.ndarray] = {}
    steps: dict[int, float] = {}

    def record(slot, rows, first, delta):
        k = max(1, math.ceil(delta / h)) if delta > 0 else 0
        u = np.array(rows, dtype=float, order="C")
        size = u.shape[1]
        code = np.full((max(k, 1), u.shape[0], size), 2, dtype=np.int8)
        if k:
            _euler_upper_record(u, delta / k, k, rates.lower, rates.upper, np.asarray(first, np.int64), code)
        # the negated problem picks the same rate as the original lower problem;
        # only the tie rule differs
        use_upper = code != 0 if mode == UPPER else code == 1
        lead = (size,) * (slot - j0)
        tables[slot] = np.moveaxis(use_upper.reshape((use_upper.shape[0],) + lead + (size,)), 0, -2)
        steps[slot] = delta / k if k else 1.0
        return u, 0.0

    _induction(work, rates, prefix, cfg, UPPER, record=record)
    engine = _induction(work, rates, prefix, cfg, UPPER)
    order = sorted(tables)
    start_time = prefix.times[-1] if j0 else 0.0
    return RatePolicy(
        times=tuple(var.times[j0:]),
        start_time=start_time,
        tables=tuple(tables[s] for s in order),
        steps=tuple(steps[s] for s in order),
        rates=rates,
        mode=mode,
        engine_value=sign * engine[0],
        engine_error=engine[1],
        observed=prefix.counts,
    )


def policy_simulate(
    var: FinitaryVariable,
    policy: RatePolicy,
    samples: int,
    seed: int,
    batch: int = 200_000,
    level: float = 0.99,
) -> tuple[float, float]:
    """Monte-Carlo mean of ``var`` under ``policy`` and its normal-approximation CI half-width."""
    if samples < 2:
        raise ValidationError("need at least two samples")
    rng = np.random.default_rng(seed)
    rel_times = np.asarray(policy.times) - policy.start_time
    base = policy.observed[-1] if policy.observed else 0

    def rate_fn(n, s, observed, segment):
        return policy.rate(segment, observed + base, n + base, s)

    total = []
    total_sq = []
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        counts = sample_counts(rate_fn, rel_times, m, policy.rates, rng) + base
        args = [np.full(m, c) for c in policy.observed] + [counts[:, i] for i in range(counts.shape[1])]
        vals = np.broadcast_to(var.payoff(*args), (m,)).astype(float)
        total.append(math.fsum(vals))
        total_sq.append(math.fsum(vals * vals))
        done += m
    mean = math.fsum(total) / samples
    var_hat = max(0.0, (math.fsum(total_sq) - samples * mean * mean) / (samples - 1))
    z = float(stats.norm.ppf(0.5 + level / 2))
    return mean, z * math.sqrt(var_hat / samples)
