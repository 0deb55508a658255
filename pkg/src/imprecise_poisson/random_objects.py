"""Stopping times, payoffs and finitary variables.

Stopping times form a closed family (constants, level hits, next jump
after another stopping time, the two-jumps-in-one-cell detector, and
pointwise min/max).  When a time does not occur within a path's horizon it
evaluates to :data:`BEYOND`, which sorts above every finite time.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Any, Callable, Iterable

import numpy as np

from .errors import ValidationError
from .paths import CountingPath, eval_path


@total_ordering
class _BeyondHorizon:
    """Sentinel for a stopping time that does not happen within the horizon."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BEYOND"

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("beyond-horizon")

    def __reduce__(self):
        return (_BeyondHorizon, ())


BEYOND = _BeyondHorizon()


def is_finite_time(value) -> bool:
    return value is not BEYOND


def as_float(value) -> float:
    """Map a stopping-time value to a float, with ``BEYOND`` as ``inf``."""
    return math.inf if value is BEYOND else float(value)


# --------------------------------------------------------------------------
# stopping times


class StoppingTime:
    """Base class; subclasses implement :meth:`evaluate`."""

    def evaluate(self, path: CountingPath):
        raise NotImplementedError

    def __call__(self, path: CountingPath):
        return self.evaluate(path)

    def constants(self) -> list[float]:
        """Finite constant times appearing in this stopping time."""
        return []


@dataclass(frozen=True)
class Constant(StoppingTime):
    t: float

    def __post_init__(self):
        if not self.t >= 0:
            raise ValidationError("constant stopping time must be nonnegative")

    def evaluate(self, path):
        return self.t if self.t <= path.horizon else BEYOND

    def constants(self):
        return [self.t]


@dataclass(frozen=True)
class HitLevel(StoppingTime):
    """First time the count reaches ``m``."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError("hit level must be a positive integer")

    def evaluate(self, path):
        jumps = path.jump_times
        return jumps[self.m - 1] if len(jumps) >= self.m else BEYOND


@dataclass(frozen=True)
class NextJumpAfter(StoppingTime):
    """First jump strictly after ``inner``."""

    inner: StoppingTime

    def evaluate(self, path):
        v = self.inner.evaluate(path)
        if v is BEYOND:
            return BEYOND
        k = bisect.bisect_right(path.jump_times, v)
        return path.jump_times[k] if k < len(path.jump_times) else BEYOND

    def constants(self):
        return self.inner.constants()


@dataclass(frozen=True)
class Min(StoppingTime):
    a: StoppingTime
    b: StoppingTime

    def evaluate(self, path):
        return min(self.a.evaluate(path), self.b.evaluate(path))

    def constants(self):
        return self.a.constants() + self.b.constants()


@dataclass(frozen=True)
class Max(StoppingTime):
    a: StoppingTime
    b: StoppingTime

    def evaluate(self, path):
        return max(self.a.evaluate(path), self.b.evaluate(path))

    def constants(self):
        return self.a.constants() + self.b.constants()


@dataclass(frozen=True, eq=False)
class CellDoubleJump(StoppingTime):
    """First time some cell ``[g_k, g_{k+1}]`` of ``grid`` has seen two jumps.

    This is the infimum over cells of the first ``r`` in the cell with
    ``N_r >= N_{g_k} + 2``, i.e. the second jump after ``g_k`` if it falls
    inside the cell.
    """

    grid: tuple[float, ...]

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("grid must be strictly increasing with at least two points")
        object.__setattr__(self, "grid", grid)

    def evaluate(self, path):
        jumps = path.jumps
        grid = np.asarray(self.grid)
        if not jumps.size:
            return BEYOND
        second = np.searchsorted(jumps, grid[:-1], side="right") + 1
        ok = second < jumps.size
        hit = np.zeros_like(ok)
        hit[ok] = jumps[second[ok]] <= grid[1:][ok]
        if not hit.any():
            return BEYOND
        return float(jumps[second[np.argmax(hit)]])

    def constants(self):
        return list(self.grid)


def stopping_time_eval(st: StoppingTime, path: CountingPath):
    return st.evaluate(path)


@dataclass
class MeasurabilityReport:
    checked: int = 0
    agreeing: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def measurability_check(st, pairs: Iterable[tuple[CountingPath, CountingPath]]) -> MeasurabilityReport:
    """Check that paths agreeing up to ``st(w1)`` give the same value.

    ``st`` may be any object with an ``evaluate(path)`` method, so that
    broken fixtures can be checked as well.
    """
    report = MeasurabilityReport()
    for w1, w2 in pairs:
        if w1.horizon != w2.horizon:
            raise ValidationError("paths in a pair must share a horizon")
        report.checked += 1
        v1 = st.evaluate(w1)
        until = w1.horizon if v1 is BEYOND else v1
        if until < 0 or not w1.agrees_with(w2, until):
            continue
        report.agreeing += 1
        v2 = st.evaluate(w2)
        if v1 != v2:
            report.violations.append((w1, w2, v1, v2))
    return report


# --------------------------------------------------------------------------
# payoffs


class Payoff:
    """A bounded function of the counts at the variable's time points.

    Calling a payoff with one integer array per time point (broadcastable)
    returns the payoff values.  ``saturation`` is a level ``L`` such that
    the payoff is unchanged when every count is clipped at ``L``; ``None``
    when no such level exists.
    """

    kind = "abstract"
    saturation: int | None = None

    def __call__(self, *counts):
        raise NotImplementedError

    @property
    def bound(self) -> float:
        raise NotImplementedError

    def span(self) -> float:
        return 2.0 * self.bound

    def negated(self) -> "Payoff":
        return Negated(self)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantPayoff(Payoff):
    value: float
    kind = "constant"
    saturation = 0

    def __call__(self, *counts):
        shape = np.broadcast(*counts).shape if counts else ()
        return np.full(shape, float(self.value))

    @property
    def bound(self):
        return abs(float(self.value))

    def span(self):
        return 0.0

    def negated(self):
        return ConstantPayoff(-self.value)

    def to_json(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class Indicator(Payoff):
    """``1{n_slot in states}``."""

    states: tuple[int, ...]
    slot: int = -1
    kind = "indicator"

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(sorted(int(s) for s in self.states)))
        if not self.states or self.states[0] < 0:
            raise ValidationError("indicator needs nonnegative states")

    @property
    def saturation(self):
        return self.states[-1] + 1

    def __call__(self, *counts):
        return np.isin(np.asarray(counts[self.slot]), self.states).astype(float)

    @property
    def bound(self):
        return 1.0

    def span(self):
        return 1.0

    def to_json(self):
        return {"kind": self.kind, "states": list(self.states), "slot": self.slot}


@dataclass(frozen=True, eq=False)
class CappedCount(Payoff):
    """``min(n_slot - n_base, cap)``; ``base=None`` measures from 0."""

    cap: int
    slot: int = -1
    base: int | None = None
    kind = "capped_count"

    def __post_init__(self):
        if self.cap < 0:
            raise ValidationError("cap must be nonnegative")

    @property
    def saturation(self):
        return int(self.cap) if self.base is None else None

    def __call__(self, *counts):
        n = np.asarray(counts[self.slot])
        if self.base is not None:
            n = n - np.asarray(counts[self.base])
        return np.minimum(n, self.cap).astype(float)

    @property
    def bound(self):
        return float(self.cap)

    def span(self):
        return float(self.cap)

    def to_json(self):
        return {"kind": self.kind, "cap": self.cap, "slot": self.slot, "base": self.base}


@dataclass(frozen=True, eq=False)
class NoJump(Payoff):
    """``1{n_j == n_i}``: no jump between two time points."""

    i: int = 0
    j: int = 1
    kind = "no_jump"

    def __call__(self, *counts):
        return (np.asarray(counts[self.j]) == np.asarray(counts[self.i])).astype(float)

    @property
    def bound(self):
        return 1.0

    def span(self):
        return 1.0

    def to_json(self):
        return {"kind": self.kind, "i": self.i, "j": self.j}


@dataclass(frozen=True, eq=False)
class Table(Payoff):
    """Dense table over ``{0..L}^k``; counts above ``L`` are clipped to ``L``."""

    values: np.ndarray
    kind = "table"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 0 or 0 in v.shape:
            raise ValidationError("table must be a non-empty array")
        if not np.all(np.isfinite(v)):
            raise ValidationError("table values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def saturation(self):
        return max(self.values.shape) - 1

    def __call__(self, *counts):
        k = self.values.ndim
        if len(counts) < k:
            raise ValidationError(f"table needs {k} counts, got {len(counts)}")
        idx = tuple(np.minimum(np.asarray(c), s - 1) for c, s in zip(counts[-k:], self.values.shape))
        return self.values[idx]

    @property
    def bound(self):
        return float(np.abs(self.values).max())

    def span(self):
        return float(self.values.max() - self.values.min())

    def negated(self):
        return Table(-self.values)

    def to_json(self):
        return {"kind": self.kind, "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class Negated(Payoff):
    inner: Payoff
    kind = "negated"

    @property
    def saturation(self):
        return self.inner.saturation

    def __call__(self, *counts):
        return -self.inner(*counts)

    @property
    def bound(self):
        return self.inner.bound

    def span(self):
        return self.inner.span()

    def negated(self):
        return self.inner

    def to_json(self):
        return {"kind": self.kind, "inner": self.inner.to_json()}


@dataclass(frozen=True, eq=False)
class FunctionPayoff(Payoff):
    """Wraps a vectorized callable with a declared bound."""

    fn: Callable[..., Any]
    declared_bound: float
    declared_saturation: int | None = None
    kind = "function"

    @property
    def saturation(self):
        return self.declared_saturation

    def __call__(self, *counts):
        return np.asarray(self.fn(*counts), dtype=float)

    @property
    def bound(self):
        return float(self.declared_bound)

    def to_json(self):
        raise ValidationError("function payoffs are not serializable")


_PAYOFF_KINDS = {
    "constant": lambda d: ConstantPayoff(float(d["value"])),
    "indicator": lambda d: Indicator(tuple(d["states"]), int(d.get("slot", -1))),
    "capped_count": lambda d: CappedCount(int(d["cap"]), int(d.get("slot", -1)), d.get("base")),
    "no_jump": lambda d: NoJump(int(d.get("i", 0)), int(d.get("j", 1))),
    "table": lambda d: Table(np.asarray(d["values"], dtype=float)),
    "negated": lambda d: Negated(payoff_from_json(d["inner"])),
}


def payoff_from_json(data) -> Payoff:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        builder = _PAYOFF_KINDS[data["kind"]]
    except KeyError as exc:
        raise ValidationError(f"unknown payoff kind in {data!r}") from exc
    return builder(data)


# --------------------------------------------------------------------------
# finitary variables


@dataclass(frozen=True, eq=False)
class FinitaryVariable:
    """``payoff(N_{t_1}, ..., N_{t_k})`` with a declared bound."""

    times: tuple[float, ...]
    payoff: Payoff
    bound: float | None = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ValidationError("a finitary variable needs at least one time point")
        if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("times must be nonnegative and strictly increasing")
        object.__setattr__(self, "times", times)
        bound = self.payoff.bound if self.bound is None else float(self.bound)
        object.__setattr__(self, "bound", bound)
        self._spot_check()

    def _spot_check(self, level: int = 6):
        k = len(self.times)
        level = max(1, min(level, int(round(4000 ** (1.0 / k)))))
        grids = np.meshgrid(*[np.arange(level + 1)] * k, indexing="ij")
        vals = np.broadcast_to(self.payoff(*grids), grids[0].shape)
        if not np.all(np.isfinite(vals)) or np.abs(vals).max() > self.bound * (1 + 1e-12):
            raise ValidationError("payoff exceeds its declared bound")

    @property
    def k(self) -> int:
        return len(self.times)

    def negated(self) -> "FinitaryVariable":
        return FinitaryVariable(self.times, self.payoff.negated(), self.bound)

    def to_json(self) -> dict:
        return {"times": list(self.times), "payoff": self.payoff.to_json()}

    @classmethod
    def from_json(cls, data) -> "FinitaryVariable":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(data["times"]), payoff_from_json(data["payoff"]), data.get("bound"))


def finitary_eval(var: FinitaryVariable, path: CountingPath) -> float:
    counts = [eval_path(path, t) for t in var.times]
    return float(var.payoff(*[np.asarray(c) for c in counts]))
