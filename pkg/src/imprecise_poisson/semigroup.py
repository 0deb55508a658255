"""Poisson generators and semigroups on a truncated state lattice.

States are ``0..n_max``; beyond ``n_max`` a lattice function is continued
by its last value (absorbing boundary), so the generators vanish at
``n_max``.  The sublinear semigroup is computed as the Euler product
``(I + h G)^k g`` and every result carries an a-priori error bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import BudgetError, ValidationError
from .paths import RateInterval

UPPER = "upper"
LOWER = "lower"
MODES = (UPPER, LOWER)


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValidationError(f"mode must be 'upper' or 'lower', got {mode!r}")
    return mode


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    values: np.ndarray
    boundary: str = "absorbing"

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 2:
            raise ValidationError("a lattice function needs at least two states")
        if not np.all(np.isfinite(v)):
            raise ValidationError("lattice values must be finite")
        if self.boundary != "absorbing":
            raise ValidationError("only the absorbing boundary is supported")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_max(self) -> int:
        return self.values.size - 1

    @property
    def span(self) -> float:
        return float(self.values.max() - self.values.min())

    def __call__(self, n):
        return self.values[np.minimum(n, self.n_max)]

    def __neg__(self):
        return LatticeFunction(-self.values)

    def extended(self, n_max: int) -> "LatticeFunction":
        """Same function on a larger lattice."""
        if n_max <= self.n_max:
            return self
        return LatticeFunction(self(np.arange(n_max + 1)))

    @classmethod
    def indicator(cls, state: int, n_max: int | None = None) -> "LatticeFunction":
        n_max = state + 1 if n_max is None else n_max
        v = np.zeros(n_max + 1)
        v[state] = 1.0
        return cls(v)

    @classmethod
    def capped(cls, cap: int, n_max: int | None = None) -> "LatticeFunction":
        n_max = cap if n_max is None else n_max
        return cls(np.minimum(np.arange(n_max + 1), cap))


@dataclass(frozen=True)
class SemigroupConfig:
    """Discretization control for the Euler scheme.

    ``theta`` caps the per-step intensity mass ``h * upper``; ``tol`` is
    the absolute error budget per semigroup application.
    """

    theta: float = 0.1
    tol: float = 1e-6
    max_steps: int = 1_000_000_000
    sigma_width: float = 6.0
    lattice_pad: int = 16

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValidationError("theta must lie in (0, 1]")
        if self.tol < 0:
            raise ValidationError("tol must be nonnegative")


@dataclass(frozen=True, eq=False)
class SemigroupResult:
    function: LatticeFunction
    error_bound: float
    steps: int
    mode: str = UPPER

    @property
    def values(self) -> np.ndarray:
        return self.function.values

    def __getitem__(self, state):
        return self.function(state)


def poisson_pmf(mu: float, z: int) -> float:
    """``exp(-mu) mu^z / z!`` evaluated in log space."""
    if mu < 0:
        raise ValidationError("mu must be nonnegative")
    if z < 0:
        return 0.0
    if mu == 0:
        return 1.0 if z == 0 else 0.0
    return math.exp(-mu + z * math.log(mu) - math.lgamma(z + 1))


def precise_generator_apply(g: LatticeFunction, lam: float) -> LatticeFunction:
    if lam < 0:
        raise ValidationError("rate must be nonnegative")
    out = np.zeros_like(g.values)
    out[:-1] = lam * np.diff(g.values)
    return LatticeFunction(out)


def generator_apply(g: LatticeFunction, rates: RateInterval, mode: str = UPPER) -> LatticeFunction:
    """Sublinear generator: per state, the max (upper) or min (lower) over both rates."""
    _check_mode(mode)
    return LatticeFunction(_generator(g.values, rates.lower, rates.upper, mode))


def _generator(values: np.ndarray, lo: float, hi: float, mode: str) -> np.ndarray:
    d = np.diff(values, axis=-1)
    out = np.zeros_like(values)
    if mode == UPPER:
        out[..., :-1] = np.where(d >= 0, hi * d, lo * d)
    else:
        out[..., :-1] = np.where(d >= 0, lo * d, hi * d)
    return out


@numba.njit(cache=True)
def _euler_upper(u, h, k, lo, hi, first):
    """In-place ``(I + h G)^k`` along the last axis of ``u`` (upper mode).

    Row ``r`` only needs states ``>= first[r]``.  Ascending sweeps read
    ``u[n+1]`` before it is overwritten.
    """
    rows, size = u.shape
    a = h * hi
    b = h * lo
    for _ in range(k):
        for r in range(rows):
            for n in range(first[r], size - 1):
                d = u[r, n + 1] - u[r, n]
                if d >= 0.0:
                    u[r, n] += a * d
                else:
                    u[r, n] += b * d


@numba.njit(cache=True)
def _euler_upper_record(u, h, k, lo, hi, first, choice):
    """As :func:`_euler_upper`, recording the sign of each forward difference.

    ``choice[i, r, n]`` is 1 for ``d > 0``, 0 for ``d < 0`` and 2 for a tie;
    index ``i`` is the time bucket ``[i h, (i+1) h)`` from the start of the
    interval, so steps are written in reverse.
    """
    rows, size = u.shape
    a = h * hi
    b = h * lo
    for s in range(k):
        i = k - 1 - s
        for r in range(rows):
            for n in range(first[r], size - 1):
                d = u[r, n + 1] - u[r, n]
                if d > 0.0:
                    u[r, n] += a * d
                    choice[i, r, n] = 1
                elif d < 0.0:
                    u[r, n] += b * d
                    choice[i, r, n] = 0
                else:
                    choice[i, r, n] = 2


def euler_step_count(delta: float, upper: float, span: float, cfg: SemigroupConfig) -> tuple[int, float]:
    """Number of Euler steps and the resulting error bound.

    ``k = max(ceil(delta*upper/theta), ceil(delta^2 (2 upper)^2 span / (2 tol)))``.
    """
    if delta == 0 or upper == 0 or span == 0:
        k_mono = math.ceil(delta * upper / cfg.theta) if delta > 0 else 0
        return max(k_mono, 1 if delta > 0 else 0), 0.0
    c = delta * delta * (2.0 * upper) ** 2 * span / 2.0
    k_mono = math.ceil(delta * upper / cfg.theta)
    k_err = math.inf if cfg.tol == 0 else math.ceil(c / cfg.tol)
    k = max(k_mono, k_err, 1)
    if k > cfg.max_steps:
        req = k if math.isfinite(k) else None
        raise BudgetError(f"Euler scheme needs {k} steps, ceiling is {cfg.max_steps}", required=req)
    return int(k), c / k


def apply_rows(
    values: np.ndarray,
    delta: float,
    rates: RateInterval,
    mode: str,
    cfg: SemigroupConfig,
    first: np.ndarray | None = None,
) -> tuple[np.ndarray, float, int]:
    """Apply the sublinear semigroup to every row of a 2-D array.

    Returns ``(result, error_bound, steps)``.  The lower mode negates,
    runs the upper recursion and negates back.
    """
    _check_mode(mode)
    if delta < 0:
        raise ValidationError("delta must be nonnegative")
    u = np.array(values, dtype=float, order="C", ndmin=2)
    if first is None:
        first = np.zeros(u.shape[0], dtype=np.int64)
    span = float(np.max(u.max(axis=1) - u.min(axis=1)))
    k, bound = euler_step_count(delta, rates.upper, span, cfg)
    if k == 0:
        return u, 0.0, 0
    if mode == LOWER:
        u = -u
    _euler_upper(u, delta / k, k, rates.lower, rates.upper, np.asarray(first, dtype=np.int64))
    if mode == LOWER:
        u = -u
    return u, bound, k


def semigroup_apply(
    g: LatticeFunction,
    delta: float,
    rates: RateInterval,
    mode: str = UPPER,
    cfg: SemigroupConfig | None = None,
) -> SemigroupResult:
    """Euler approximation of the sublinear Poisson semigroup at ``delta``."""
    cfg = cfg or SemigroupConfig()
    out, bound, k = apply_rows(g.values[None, :], delta, rates, mode, cfg)
    return SemigroupResult(LatticeFunction(out[0]), bound, k, mode)


def precise_semigroup_apply(g: LatticeFunction, delta: float, lam: float) -> SemigroupResult:
    """Exact precise Poisson semigroup, summing against the Poisson pmf.

    With the absorbing continuation the sum is finite: mass beyond the
    lattice is collected at ``n_max`` through the complementary tail.
    """
    if delta < 0 or lam < 0:
        raise ValidationError("delta and rate must be nonnegative")
    mu = lam * delta
    v = g.values
    size = v.size
    pmf = np.array([poisson_pmf(mu, z) for z in range(size)])
    out = np.empty(size)
    for n in range(size):
        m = size - 1 - n
        head = pmf[:m]
        tail = max(0.0, 1.0 - math.fsum(head))
        out[n] = math.fsum(v[n : n + m] * head) + v[-1] * tail
    # rounding only: fsum is exact up to the final rounding of each term
    bound = 4 * size * np.finfo(float).eps * max(1.0, float(np.abs(v).max()))
    return SemigroupResult(LatticeFunction(out), bound, 0, UPPER)


@dataclass
class Ladder:
    """Euler iterates ``g_k = (I + dt G)^(n+1-k) g`` for ``k = 1..n+1``."""

    grid: np.ndarray
    values: np.ndarray  # shape (n + 1, states); row k-1 holds g_k
    rates: RateInterval
    dt: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1


def build_ladder(g: LatticeFunction, s: float, t: float, n: int, rates: RateInterval) -> Ladder:
    if not s < t:
        raise ValidationError("need s < t")
    if n < 1:
        raise ValidationError("n must be positive")
    dt = (t - s) / n
    values = np.empty((n + 1, g.values.size))
    values[n] = g.values
    for k in range(n - 1, -1, -1):
        values[k] = values[k + 1] + dt * _generator(values[k + 1], rates.lower, rates.upper, UPPER)
    grid = s + dt * np.arange(n + 1)
    grid[-1] = t
    return Ladder(grid, values, rates, dt)
