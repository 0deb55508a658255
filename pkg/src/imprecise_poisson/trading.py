"""Elementary trading strategies and their capital processes.

A one-sided strategy stakes ``up_k >= 0`` on ``N - upper * time`` and
``down_k >= 0`` on ``lower * time - N`` over each round
``[tau_k, tau_{k+1}]``.  A two-sided strategy (only for a precise rate)
stakes ``h_k = up_k - down_k`` on ``N - rate * time``.

Stakes are tables indexed by the count at the start of the round, so they
are measurable at ``tau_k`` by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import HorizonError, StrategyError, ValidationError
from .paths import CountingPath, RateInterval
from .random_objects import (
    CellDoubleJump,
    Constant,
    FinitaryVariable,
    HitLevel,
    Max,
    Min,
    NextJumpAfter,
    StoppingTime,
    as_float,
)
from .semigroup import LatticeFunction, build_ladder

ONE_SIDED = "one"
TWO_SIDED = "two"


@dataclass(frozen=True, eq=False)
class GridSchedule:
    """Stopping times ``grid[k] ∧ cutoff`` for a fixed time grid."""

    grid: tuple[float, ...]
    cutoff: StoppingTime

    def __len__(self):
        return len(self.grid)

    def __getitem__(self, k) -> StoppingTime:
        return Min(Constant(self.grid[k]), self.cutoff)

    def evaluate(self, path: CountingPath) -> np.ndarray:
        grid = np.asarray(self.grid)
        grid = np.where(grid <= path.horizon, grid, np.inf)
        return np.minimum(grid, as_float(self.cutoff.evaluate(path)))

    def constants(self) -> list[float]:
        return list(self.grid)


@dataclass(frozen=True, eq=False)
class Rounds:
    """A strategy realized on one path: per-round start, end and stakes."""

    start: np.ndarray
    end: np.ndarray
    up: np.ndarray
    down: np.ndarray


def _evaluate_times(times, path) -> np.ndarray:
    if hasattr(times, "evaluate") and not isinstance(times, StoppingTime):
        return np.asarray(times.evaluate(path), dtype=float)
    return np.array([as_float(st.evaluate(path)) for st in times])


@dataclass(frozen=True, eq=False)
class Strategy:
    """Elementary strategy with ``n`` rounds and ``n + 1`` stopping times.

    ``up`` and ``down`` have shape ``(n, S)``: round ``k`` stakes when the
    count at ``tau_k`` is ``x`` are read at column ``min(x, S - 1)``.
    """

    times: Sequence[StoppingTime] | GridSchedule
    up: np.ndarray
    down: np.ndarray
    rates: RateInterval
    sideness: str = ONE_SIDED
    stake_bound: float | None = None

    def __post_init__(self):
        up = np.atleast_2d(np.asarray(self.up, dtype=float))
        down = np.atleast_2d(np.asarray(self.down, dtype=float))
        n = len(self.times) - 1
        if n < 0:
            raise ValidationError("a strategy needs at least one stopping time")
        if n == 0:
            up = down = np.zeros((0, 1))
        if up.shape != down.shape or up.shape[0] != n:
            raise ValidationError(f"stake tables must have shape ({n}, S)")
        if np.any(up < 0) or np.any(down < 0):
            raise ValidationError("one-sided stakes must be nonnegative")
        if self.sideness not in (ONE_SIDED, TWO_SIDED):
            raise ValidationError("sideness must be 'one' or 'two'")
        if self.sideness == TWO_SIDED and not self.rates.is_precise:
            raise ValidationError("two-sided strategies need a precise rate")
        bound = self.stake_bound
        if bound is None:
            bound = float(max(up.max(initial=0.0), down.max(initial=0.0)))
        if up.size and max(up.max(), down.max()) > bound:
            raise StrategyError("stakes exceed the declared stake bound")
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)
        object.__setattr__(self, "stake_bound", bound)

    @property
    def n_rounds(self) -> int:
        return self.up.shape[0]

    @classmethod
    def two_sided(cls, times, stakes, rate: float, stake_bound=None) -> "Strategy":
        """Two-sided strategy with (signed) stake tables ``stakes``."""
        h = np.atleast_2d(np.asarray(stakes, dtype=float))
        if len(times) == 1:
            h = np.zeros((0, 1))
        return cls(times, np.maximum(h, 0), np.maximum(-h, 0), RateInterval.precise(rate), TWO_SIDED, stake_bound)

    def as_one_sided(self) -> "Strategy":
        return Strategy(self.times, self.up, self.down, self.rates, ONE_SIDED, self.stake_bound)

    def stopping_values(self, path: CountingPath) -> np.ndarray:
        return _evaluate_times(self.times, path)

    def rounds_on(self, path: CountingPath) -> Rounds:
        taus = self.stopping_values(path)
        if np.any(taus[1:] < taus[:-1]):
            raise StrategyError("stopping times are not increasing on this path")
        start, end = taus[:-1], taus[1:]
        cols = self.up.shape[1]
        finite = start <= path.horizon
        x = np.zeros(start.size, dtype=np.int64)
        x[finite] = path.counts(start[finite])
        x = np.minimum(x, cols - 1)
        rows = np.arange(start.size)
        return Rounds(start, end, self.up[rows, x], self.down[rows, x])

    def constants(self) -> list[float]:
        if isinstance(self.times, GridSchedule):
            return self.times.constants()
        return [c for st in self.times for c in st.constants()]


@dataclass(frozen=True, eq=False)
class MergedStrategy:
    """Sum of several one-sided strategies, realized by interleaving rounds.

    On each path the union of all stopping times splits time into
    consecutive rounds; a round's stakes are the sums of the stakes of the
    component rounds covering it.
    """

    parts: tuple[Strategy, ...]
    sideness: str = ONE_SIDED

    def __post_init__(self):
        if not self.parts:
            raise ValidationError("nothing to merge")
        rates = {p.rates for p in self.parts}
        if len(rates) != 1:
            raise ValidationError("merged strategies must share their rate interval")

    @property
    def rates(self) -> RateInterval:
        return self.parts[0].rates

    @property
    def stake_bound(self) -> float:
        return sum(p.stake_bound for p in self.parts)

    def rounds_on(self, path: CountingPath) -> Rounds:
        pieces = [p.rounds_on(path) for p in self.parts]
        cuts = np.unique(np.concatenate([np.concatenate([r.start, r.end]) for r in pieces]))
        start, end = cuts[:-1], cuts[1:]
        up = np.zeros(start.size)
        down = np.zeros(start.size)
        for r in pieces:
            for a, b, u, d in zip(r.start, r.end, r.up, r.down):
                cover = (start >= a) & (end <= b)
                up[cover] += u
                down[cover] += d
        return Rounds(start, end, up, down)

    def constants(self) -> list[float]:
        return [c for p in self.parts for c in p.constants()]


@dataclass(frozen=True, eq=False)
class CapitalLedger:
    initial: float
    strategy: Strategy | MergedStrategy
    _cache: dict = field(default_factory=dict, repr=False)

    def rounds(self, path: CountingPath) -> Rounds:
        key = id(path)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is path:
            return hit[1]
        r = self.strategy.rounds_on(path)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = (path, r)
        return r

    def capital(self, path: CountingPath, t: float) -> float:
        return capital_process_eval(self, path, t)


def capital_process_eval(ledger: CapitalLedger, path: CountingPath, t: float) -> float:
    """Trader's capital at time ``t`` along ``path``."""
    if t < 0 or t > path.horizon:
        raise HorizonError(f"t={t} outside [0, {path.horizon}]")
    strategy = ledger.strategy
    r = ledger.rounds(path)
    if r.up.size and max(np.abs(r.up).max(), np.abs(r.down).max()) > strategy.stake_bound:
        raise StrategyError("stake bound violated")
    a = np.minimum(r.start, t)
    b = np.minimum(r.end, t)
    dn = (path.counts(b) - path.counts(a)).astype(float)
    dt = b - a
    rates = strategy.rates
    if strategy.sideness == TWO_SIDED:
        terms = (r.up - r.down) * (dn - rates.upper * dt)
    else:
        terms = r.up * (dn - rates.upper * dt) + r.down * (rates.lower * dt - dn)
    return float(ledger.initial) + math.fsum(terms[dt > 0])


def increment_identity_check(ledger: CapitalLedger, path: CountingPath, t: float, r: float, rel: float = 1e-12) -> bool:
    """Capital change within one round against the net-stake identity.

    ``K_r - K_t = (up - down)(N_r - N_t - lower (r - t)) - up (upper - lower)(r - t)``.
    """
    if r < t:
        raise ValidationError("need t <= r")
    rounds = ledger.rounds(path)
    inside = np.flatnonzero((rounds.start <= t) & (r <= rounds.end) & (rounds.start < rounds.end))
    if not inside.size:
        raise ValidationError("t and r must lie within a single round")
    k = inside[0]
    up, down = rounds.up[k], rounds.down[k]
    lo, hi = ledger.strategy.rates.lower, ledger.strategy.rates.upper
    k_t = capital_process_eval(ledger, path, t)
    k_r = capital_process_eval(ledger, path, r)
    dn = path(r) - path(t)
    rhs = (up - down) * (dn - lo * (r - t)) - up * (hi - lo) * (r - t)
    scale = max(1.0, abs(k_t), abs(k_r), abs(ledger.initial), up + down)
    return abs((k_r - k_t) - rhs) <= rel * scale


# ------------------------------------------------------------- superhedging


def synthesize_superhedge(
    g: LatticeFunction,
    s: float,
    t: float,
    n: int,
    rates: RateInterval,
    start_state: int = 0,
) -> tuple[Strategy, float]:
    """Grid strategy superhedging ``g(N_t)`` from time ``s``.

    Rounds follow the grid ``s + k (t - s)/n`` until some cell holds two
    jumps.  Stakes at round ``k`` are the positive and negative parts of
    the forward difference of the ``k+1``-th Euler iterate at the current
    count.  Initial capital is the first iterate at ``start_state`` plus
    ``span(g) * lower * (t - s)/n``.
    """
    ladder = build_ladder(g, s, t, n, rates)
    diff = np.zeros((n, g.values.size))
    diff[:, :-1] = np.diff(ladder.values[1:], axis=1)
    schedule = GridSchedule(tuple(ladder.grid), CellDoubleJump(tuple(ladder.grid)))
    strategy = Strategy(schedule, np.maximum(diff, 0.0), np.maximum(-diff, 0.0), rates)
    delta = g.span * rates.lower * ladder.dt
    initial = float(ladder.values[0][min(start_state, g.n_max)]) + delta
    return strategy, initial


def in_good_event(path: CountingPath, grid: Sequence[float]) -> bool:
    """True when every grid cell holds at most one jump."""
    c = path.counts(np.asarray(grid))
    return bool(np.all(np.diff(c) <= 1))


@dataclass
class SuperhedgeReport:
    total: int = 0
    good: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    floor_violations: int = 0
    worst_bad_capital: float = math.inf

    @property
    def complement_frequency(self) -> float:
        return (self.total - self.good) / self.total if self.total else 0.0

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.floor_violations == 0


def superhedge_verify(
    strategy: Strategy,
    initial: float,
    var: FinitaryVariable,
    paths: Sequence[CountingPath],
    tol: float = 1e-9,
) -> SuperhedgeReport:
    """Check capital at the payoff time on good paths and the floor elsewhere.

    Good paths have at most one jump per grid cell; there the capital must
    dominate the payoff.  On the other paths the capital must stay above
    ``2 inf g - sup g``.
    """
    if var.k != 1:
        raise ValidationError("superhedge verification takes a single-time variable")
    t = var.times[0]
    grid = strategy.times.grid if isinstance(strategy.times, GridSchedule) else None
    states = np.arange(strategy.up.shape[1] + 1)
    gvals = var.payoff(states)
    floor = 2 * gvals.min() - gvals.max()
    ledger = CapitalLedger(initial, strategy)
    report = SuperhedgeReport()
    for path in paths:
        if path.horizon < t:
            raise ValidationError("path horizon shorter than the payoff time")
        report.total += 1
        cap = capital_process_eval(ledger, path, t)
        if grid is None or in_good_event(path, grid):
            report.good += 1
            margin = cap - float(var.payoff(np.asarray(path(t))))
            report.worst_margin = min(report.worst_margin, margin)
            if margin < -tol:
                report.violations += 1
        else:
            report.worst_bad_capital = min(report.worst_bad_capital, cap)
            if cap < floor - tol:
                report.floor_violations += 1
    return report


# --------------------------------------------------------------- coherence


def settlement_time(strategy, t: float) -> float:
    lo = strategy.rates.lower
    last = max([t] + [c for c in strategy.constants() if math.isfinite(c)])
    return last + (1.0 / lo if lo > 0 else 1.0)


def _extend(prefix: tuple[float, ...], u: float, horizon: float, jumps_from: float | None, lo: float):
    """Path equal to ``prefix`` up to ``u``; jumps at ``jumps_from + j/lo`` if requested."""
    tail = []
    if jumps_from is not None:
        j = 0
        while True:
            s = jumps_from + j / lo
            if s > horizon:
                break
            tail.append(s)
            j += 1
    return CountingPath(prefix + tuple(tail), horizon)


def coherence_falsify(ledger: CapitalLedger, t: float, omega: CountingPath, epsilon: float) -> CountingPath:
    """Continuation of ``omega`` after ``t`` on which the trader gains less than ``epsilon``.

    Walks forward one round at a time.  While a round with net stake
    ``up - down >= 0`` is open the path stays flat; while one with a
    negative net stake is open it jumps every ``1/lower`` time units after
    a short delay, so that each round adds less than ``epsilon / n``.
    The returned path is settled at :func:`settlement_time`.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    strategy = ledger.strategy
    rounds = ledger.rounds(omega)
    open_now = rounds.end > t
    if not np.any(open_now) or not np.any((rounds.up[open_now] > 0) | (rounds.down[open_now] > 0)):
        return omega

    lo = strategy.rates.lower
    horizon = max(settlement_time(strategy, t), omega.horizon)
    n = max(1, len(rounds.start))
    budget = epsilon / n
    u = t
    prefix = tuple(s for s in omega.jump_times if s <= t)
    cand = _extend(prefix, u, horizon, None, lo)
    for _ in range(4 * n + 4):
        r = strategy.rounds_on(cand)
        later = np.flatnonzero(r.end > u)
        if not later.size:
            break
        k = later[0]
        if r.start[k] > u:
            # no bet is running: idle until the next round opens
            cand = _extend(prefix, u, horizon, None, lo)
            nxt = strategy.rounds_on(cand).start[k]
            if not math.isfinite(nxt) or nxt > horizon:
                break
            u = nxt
            prefix = tuple(s for s in cand.jump_times if s <= u)
            continue
        net = r.up[k] - r.down[k]
        if net >= 0 or lo == 0:
            cand = _extend(prefix, u, horizon, None, lo)
        else:
            delay = min(1.0 / lo, budget / (2 * -net * lo))
            cand = _extend(prefix, u, horizon, u + delay, lo)
        end = strategy.rounds_on(cand).end[k]
        if not math.isfinite(end) or end > horizon:
            break
        u = end
        prefix = tuple(s for s in cand.jump_times if s <= u)
        cand = _extend(prefix, u, horizon, None, lo)
    return cand


def strategy_to_json(strategy: Strategy, ladder=None) -> dict:
    out = {
        "sideness": strategy.sideness,
        "rates": [strategy.rates.lower, strategy.rates.upper],
        "up": strategy.up.tolist(),
        "down": strategy.down.tolist(),
    }
    if isinstance(strategy.times, GridSchedule):
        out["grid"] = list(strategy.times.grid)
        out["cutoff"] = "cell_double_jump"
    else:
        out["times"] = [stopping_time_to_json(st) for st in strategy.times]
    if ladder is not None:
        out["ladder"] = ladder.values.tolist()
    return out


def strategy_from_json(data: dict) -> Strategy:
    rates = RateInterval(*data["rates"])
    if "grid" in data:
        grid = tuple(data["grid"])
        times = GridSchedule(grid, CellDoubleJump(grid))
    else:
        times = [stopping_time_from_json(d) for d in data["times"]]
    return Strategy(times, np.asarray(data["up"]), np.asarray(data["down"]), rates, data.get("sideness", ONE_SIDED))


def stopping_time_to_json(st: StoppingTime) -> dict:
    if isinstance(st, Constant):
        return {"kind": "constant", "t": st.t}
    if isinstance(st, HitLevel):
        return {"kind": "hit_level", "m": st.m}
    if isinstance(st, NextJumpAfter):
        return {"kind": "next_jump_after", "inner": stopping_time_to_json(st.inner)}
    if isinstance(st, (Min, Max)):
        return {"kind": "min" if isinstance(st, Min) else "max", "a": stopping_time_to_json(st.a), "b": stopping_time_to_json(st.b)}
    if isinstance(st, CellDoubleJump):
        return {"kind": "cell_double_jump", "grid": list(st.grid)}
    raise ValidationError(f"cannot serialize {st!r}")


def stopping_time_from_json(d: dict) -> StoppingTime:
    kind = d.get("kind")
    if kind == "constant":
        return Constant(float(d["t"]))
    if kind == "hit_level":
        return HitLevel(int(d["m"]))
    if kind == "next_jump_after":
        return NextJumpAfter(stopping_time_from_json(d["inner"]))
    if kind in ("min", "max"):
        cls = Min if kind == "min" else Max
        return cls(stopping_time_from_json(d["a"]), stopping_time_from_json(d["b"]))
    if kind == "cell_double_jump":
        return CellDoubleJump(tuple(d["grid"]))
    raise ValidationError(f"unknown stopping time {d!r}")
