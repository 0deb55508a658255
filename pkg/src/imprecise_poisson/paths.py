"""Counting paths, rate intervals and path sampling.

A counting path is stored as its strictly increasing jump times on a
finite horizon ``[0, horizon]``.  The path is right-continuous, so a jump
at exactly ``t`` is already counted at ``t``.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import HorizonError, InvalidPolicyError, ValidationError

RatePolicyFn = Callable[[int, float], float]


@dataclass(frozen=True)
class RateInterval:
    """Bounds ``lower <= upper`` on the jump intensity."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValidationError("rates must be finite")
        if lo < 0:
            raise ValidationError("rates must be nonnegative")
        if lo > hi:
            raise ValidationError("lower exceeds upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def precise(cls, rate: float) -> "RateInterval":
        return cls(rate, rate)

    @classmethod
    def parse(cls, text: str) -> "RateInterval":
        """Parse ``"lo,hi"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 2:
            raise ValidationError(f"expected 'lo,hi', got {text!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ValidationError(f"malformed rates {text!r}") from exc
        return cls(lo, hi)

    @property
    def is_precise(self) -> bool:
        return self.lower == self.upper

    def contains(self, rate: float) -> bool:
        return self.lower <= rate <= self.upper

    def __contains__(self, rate) -> bool:
        return self.contains(rate)


@dataclass(frozen=True)
class CountingPath:
    """A realization of the counting process up to ``horizon``."""

    jump_times: tuple[float, ...]
    horizon: float
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        jumps = tuple(float(s) for s in self.jump_times)
        horizon = float(self.horizon)
        if not math.isfinite(horizon) or horizon < 0:
            raise ValidationError("horizon must be a finite nonnegative number")
        if jumps:
            if jumps[0] <= 0:
                raise ValidationError("jump times must be positive (paths start in 0)")
            if any(b <= a for a, b in zip(jumps, jumps[1:])):
                raise ValidationError("jump times must be strictly increasing")
            if jumps[-1] > horizon:
                raise ValidationError("jump time beyond the horizon")
        object.__setattr__(self, "jump_times", jumps)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "_array", np.asarray(jumps, dtype=float))

    @property
    def jumps(self) -> np.ndarray:
        return self._array

    def __call__(self, t: float) -> int:
        return eval_path(self, t)

    def counts(self, times) -> np.ndarray:
        """Vectorized evaluation; ``times`` must lie in ``[0, horizon]``."""
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < 0 or times.max() > self.horizon):
            raise HorizonError("time outside [0, horizon]")
        return np.searchsorted(self._array, times, side="right")

    def agrees_with(self, other: "CountingPath", until: float) -> bool:
        """True if both paths coincide on ``[0, until]``."""
        if until > min(self.horizon, other.horizon):
            return False
        k1 = bisect.bisect_right(self.jump_times, until)
        k2 = bisect.bisect_right(other.jump_times, until)
        return self.jump_times[:k1] == other.jump_times[:k2]

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "jumps": list(self.jump_times)}

    @classmethod
    def from_json(cls, data) -> "CountingPath":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(data["jumps"]), data["horizon"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "jump_time"])
        for i, s in enumerate(self.jump_times):
            writer.writerow([i, repr(s)])
        return buf.getvalue()


def eval_path(path: CountingPath, t: float) -> int:
    """Number of jumps in ``[0, t]``."""
    if t < 0 or t > path.horizon:
        raise HorizonError(f"t={t} outside [0, {path.horizon}]")
    return bisect.bisect_right(path.jump_times, t)


def stitch(omega: CountingPath, tau_value: float, varpi: CountingPath) -> CountingPath:
    """Follow ``omega`` up to ``tau_value`` and the increments of ``varpi`` afterwards."""
    if tau_value < 0 or tau_value > omega.horizon:
        raise HorizonError(f"stitch point {tau_value} outside [0, {omega.horizon}]")
    head = omega.jump_times[: bisect.bisect_right(omega.jump_times, tau_value)]
    tail = tuple(tau_value + r for r in varpi.jump_times if r > 0)
    return CountingPath(head + tail, tau_value + varpi.horizon)


def shift(omega: CountingPath, s: float) -> CountingPath:
    """Increments of ``omega`` from time ``s`` on, as a path starting in 0."""
    if s < 0 or s > omega.horizon:
        raise HorizonError(f"shift {s} outside [0, {omega.horizon}]")
    k = bisect.bisect_right(omega.jump_times, s)
    return CountingPath(tuple(r - s for r in omega.jump_times[k:]), omega.horizon - s)


def constant_policy(rate: float) -> RatePolicyFn:
    return lambda n, t: rate


def sample_path(
    policy: RatePolicyFn,
    horizon: float,
    seed: int,
    rates: RateInterval,
) -> CountingPath:
    """Simulate a path by thinning a rate-``rates.upper`` Poisson stream.

    ``policy(n, t)`` is the intensity just before ``t`` when ``n`` jumps have
    occurred; it must stay within ``rates``.
    """
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    rng = np.random.default_rng(seed)
    hi = rates.upper
    jumps: list[float] = []
    if hi == 0:
        return CountingPath((), horizon)
    t = 0.0
    while True:
        t += rng.exponential(1.0 / hi)
        if t > horizon:
            break
        rate = policy(len(jumps), t)
        if not rates.contains(rate):
            raise InvalidPolicyError(f"policy rate {rate} outside [{rates.lower}, {rates.upper}]")
        if rng.random() * hi < rate:
            jumps.append(t)
    return CountingPath(tuple(jumps), horizon)


def sample_paths(rate: float, horizon: float, count: int, seed: int) -> list[CountingPath]:
    """Constant-rate paths, generated from uniform order statistics."""
    rng = np.random.default_rng(seed)
    totals = rng.poisson(rate * horizon, size=count)
    out = []
    for m in totals:
        times = np.sort(rng.uniform(0.0, horizon, size=m))
        times = times[times > 0]
        out.append(CountingPath(tuple(np.unique(times)), horizon))
    return out


def sample_counts(
    rate_fn: Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray],
    times: Sequence[float],
    samples: int,
    rates: RateInterval,
    rng: np.random.Generator,
) -> np.ndarray:
    """Batch thinning simulation returning counts at ``times``.

    ``rate_fn(n, s, observed, segment)`` gives per-sample intensities at
    candidate times ``s`` (relative to the segment start) with current
    counts ``n`` and the counts ``observed`` at earlier ``times``
    (shape ``(samples, segment)``).  The exponential clock restarts at
    each time point, which is exact by memorylessness.
    """
    times = np.asarray(times, dtype=float)
    out = np.zeros((samples, len(times)), dtype=np.int64)
    n = np.zeros(samples, dtype=np.int64)
    hi = rates.upper
    prev = 0.0
    for j, tj in enumerate(times):
        length = tj - prev
        if hi > 0 and length > 0:
            clock = np.zeros(samples)
            idx = np.arange(samples)
            while idx.size:
                clock[idx] += rng.exponential(1.0 / hi, size=idx.size)
                idx = idx[clock[idx] <= length]
                if not idx.size:
                    break
                lam = np.asarray(rate_fn(n[idx], clock[idx], out[idx, :j], j), dtype=float)
                if np.any(lam < rates.lower) or np.any(lam > hi):
                    raise InvalidPolicyError("policy rate outside the rate interval")
                accept = rng.random(idx.size) * hi < lam
                n[idx[accept]] += 1
        out[:, j] = n
        prev = tj
    return out
