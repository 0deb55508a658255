"""Command-line interface.

Every subcommand writes JSON (or CSV for ``simulate --format csv``) to
stdout and diagnostics to stderr.  Exit status is 0 on success, 2 on
invalid input and 3 when a numerical budget cannot be met.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BudgetError, ValidationError
from .expectation import (
    ConditioningPrefix,
    expectation_finitary,
    renewal_time_bounds,
)
from .oracle import constant_rate_envelope, extract_policy, policy_simulate
from .paths import CountingPath, RateInterval, constant_policy, sample_path
from .random_objects import CappedCount, FinitaryVariable, Indicator, Payoff, Table, payoff_from_json
from .semigroup import LatticeFunction, SemigroupConfig, build_ladder, semigroup_apply
from .trading import (
    CapitalLedger,
    capital_process_eval,
    coherence_falsify,
    strategy_from_json,
    strategy_to_json,
    synthesize_superhedge,
)

CONFIG_ENV = "IMPRECISE_POISSON_CONFIG"
EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3


@dataclass(frozen=True)
class RunConfig:
    rates: RateInterval | None = None
    tol: float = 1e-6
    theta: float = 0.1
    seed: int = 0
    fmt: str = "json"
    max_steps: int = 1_000_000_000

    def __post_init__(self):
        if self.tol < 0:
            raise ValidationError("tol must be nonnegative")
        if not 0 < self.theta <= 1:
            raise ValidationError("theta must lie in (0, 1]")
        if self.fmt not in ("json", "csv"):
            raise ValidationError("format must be json or csv")

    @property
    def semigroup(self) -> SemigroupConfig:
        return SemigroupConfig(theta=self.theta, tol=self.tol, max_steps=self.max_steps)


def _defaults() -> dict:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    return {k: data[k] for k in ("tol", "theta", "seed", "max_steps") if k in data}


def _round(obj):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(f"{obj:.12g}")
    if isinstance(obj, (np.floating,)):
        return _round(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), sort_keys=True)


def _load_json(text: str):
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON: {exc}") from exc


def parse_payoff(text: str) -> Payoff:
    """``indicator:s[,s..]``, ``capped:M``, ``table:v0,v1,..`` or a JSON payoff."""
    text = text.strip()
    if text.startswith("{") or text.startswith("@"):
        return payoff_from_json(_load_json(text))
    kind, _, arg = text.partition(":")
    try:
        if kind == "indicator":
            return Indicator(tuple(int(s) for s in arg.split(",")))
        if kind == "capped":
            return CappedCount(int(arg))
        if kind == "table":
            return Table(np.array([float(v) for v in arg.split(",")]))
    except ValueError as exc:
        raise ValidationError(f"malformed payoff {text!r}") from exc
    raise ValidationError(f"unknown payoff {text!r}")


def payoff_to_lattice(payoff: Payoff) -> LatticeFunction:
    if payoff.saturation is None:
        raise ValidationError("payoff must be constant beyond some count to live on a lattice")
    n_max = max(1, payoff.saturation)
    return LatticeFunction(np.broadcast_to(payoff(np.arange(n_max + 1)), (n_max + 1,)))


def _rates(args) -> RateInterval:
    if getattr(args, "rates", None):
        return RateInterval.parse(args.rates)
    lo, hi = getattr(args, "lambda_lo", None), getattr(args, "lambda_hi", None)
    if lo is None or hi is None:
        raise ValidationError("rates required (--rates lo,hi or --lambda-lo/--lambda-hi)")
    return RateInterval(lo, hi)


def _config(args) -> RunConfig:
    d = _defaults()
    return RunConfig(
        rates=None,
        tol=args.tol if getattr(args, "tol", None) is not None else d.get("tol", 1e-6),
        theta=args.theta if getattr(args, "theta", None) is not None else d.get("theta", 0.1),
        seed=args.seed if getattr(args, "seed", None) is not None else d.get("seed", 0),
        fmt=getattr(args, "format", "json"),
        max_steps=d.get("max_steps", 1_000_000_000),
    )


# ------------------------------------------------------------------ commands


def cmd_renewal(args, out):
    lower, upper = renewal_time_bounds(_rates(args))
    out.write(dumps({"lower": lower, "upper": upper}) + "\n")


def _variable(args) -> FinitaryVariable:
    return FinitaryVariable.from_json(_load_json(args.variable))


def _prefix(args) -> ConditioningPrefix:
    return ConditioningPrefix.from_json(_load_json(args.prefix) if args.prefix else ())


def cmd_expect(args, out):
    rates = _rates(args)
    cfg = _config(args)
    res = expectation_finitary(_variable(args), rates, _prefix(args), cfg.semigroup, args.mode)
    out.write(dumps(res.to_json()) + "\n")


def cmd_semigroup(args, out):
    rates = _rates(args)
    cfg = _config(args)
    g = payoff_to_lattice(parse_payoff(args.payoff))
    res = semigroup_apply(g, args.delta, rates, args.mode, cfg.semigroup)
    values = {str(n): float(v) for n, v in enumerate(res.values)}
    out.write(dumps({"values": values, "error_bound": res.error_bound, "steps": res.steps, "mode": args.mode}) + "\n")


def cmd_simulate(args, out):
    rates = _rates(args)
    cfg = _config(args)
    rate = rates.upper if args.rate is None else args.rate
    path = sample_path(constant_policy(rate), args.horizon, cfg.seed, rates)
    if cfg.fmt == "csv":
        out.write(path.to_csv())
    else:
        out.write(dumps(path.to_json()) + "\n")


def cmd_superhedge(args, out):
    rates = _rates(args)
    g = payoff_to_lattice(parse_payoff(args.payoff))
    strategy, initial = synthesize_superhedge(g, args.s, args.t, args.n, rates, args.state)
    ladder = build_ladder(g, args.s, args.t, args.n, rates) if args.ladder else None
    payload = {"strategy": strategy_to_json(strategy, ladder), "initial_capital": initial, "state": args.state}
    out.write(dumps(payload) + "\n")


def cmd_coherence(args, out):
    data = _load_json(args.strategy)
    if "strategy" in data:
        initial = float(data.get("initial_capital", 0.0))
        data = data["strategy"]
    else:
        initial = float(args.initial)
    strategy = strategy_from_json(data)
    omega = CountingPath.from_json(_load_json(args.path))
    ledger = CapitalLedger(initial, strategy)
    varpi = coherence_falsify(ledger, args.t, omega, args.epsilon)
    payload = {
        "path": varpi.to_json(),
        "capital_at_t": capital_process_eval(ledger, omega, args.t),
        "settlement_capital": capital_process_eval(ledger, varpi, varpi.horizon),
        "settlement_time": varpi.horizon,
        "epsilon": args.epsilon,
    }
    out.write(dumps(payload) + "\n")


def cmd_oracle(args, out):
    rates = _rates(args)
    cfg = _config(args)
    var = _variable(args)
    prefix = _prefix(args)
    grid = [float(x) for x in args.grid.split(",")] if args.grid else list(np.linspace(rates.lower, rates.upper, 5))
    if any(not rates.contains(lam) for lam in grid):
        raise ValidationError("grid rates must lie within the rate interval")
    envelope = constant_rate_envelope(var, grid, args.mode, prefix)
    policy = extract_policy(var, rates, args.h, args.mode, prefix, cfg.semigroup)
    mean, ci = policy_simulate(var, policy, args.samples, cfg.seed)
    engine, bound = policy.engine_value, policy.engine_error
    if args.mode == "upper":
        bracket = envelope <= engine + bound
    else:
        bracket = envelope >= engine - bound
    achieved = abs(mean - engine) <= ci + bound
    payload = {
        "envelope": envelope,
        "simulated_mean": mean,
        "ci": ci,
        "engine_value": engine,
        "error_bound": bound,
        "verdict": "pass" if bracket and achieved else "fail",
    }
    out.write(dumps(payload) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imprecise-poisson", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def rates_flags(p):
        p.add_argument("--rates", help="rate bounds 'lo,hi'")
        p.add_argument("--lambda-lo", type=float)
        p.add_argument("--lambda-hi", type=float)

    def numeric_flags(p):
        p.add_argument("--tol", type=float)
        p.add_argument("--theta", type=float)

    p = sub.add_parser("renewal", help="expected time until the next jump")
    rates_flags(p)
    p.set_defaults(func=cmd_renewal)

    p = sub.add_parser("expect", help="conditional upper/lower expectation of a finitary variable")
    rates_flags(p)
    numeric_flags(p)
    p.add_argument("--variable", required=True, help="variable JSON or @file")
    p.add_argument("--prefix", help="JSON list of [time, count] pairs")
    p.add_argument("--mode", choices=("upper", "lower"), default="upper")
    p.set_defaults(func=cmd_expect)

    p = sub.add_parser("semigroup", help="apply the sublinear Poisson semigroup to a payoff")
    rates_flags(p)
    numeric_flags(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--payoff", required=True)
    p.add_argument("--mode", choices=("upper", "lower"), default="upper")
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("simulate", help="sample a counting path by thinning")
    rates_flags(p)
    p.add_argument("--rate", type=float, help="constant intensity (default: upper rate)")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("superhedge", help="grid superhedging strategy for g(N_t)")
    rates_flags(p)
    p.add_argument("--payoff", required=True)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--state", type=int, default=0)
    p.add_argument("--ladder", action="store_true", help="include the Euler ladder")
    p.set_defaults(func=cmd_superhedge)

    p = sub.add_parser("coherence", help="continuation on which a strategy gains less than epsilon")
    p.add_argument("--strategy", required=True, help="strategy JSON or @file")
    p.add_argument("--path", required=True, help="path JSON or @file")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--initial", type=float, default=0.0)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("oracle", help="envelope and simulation bracket around the engine value")
    rates_flags(p)
    numeric_flags(p)
    p.add_argument("--variable", required=True)
    p.add_argument("--prefix")
    p.add_argument("--mode", choices=("upper", "lower"), default="upper")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="comma-separated constant rates")
    p.add_argument("--h", type=float, default=1e-3, help="policy bucket width")
    p.set_defaults(func=cmd_oracle)
    return parser


def run_command(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        args.func(args, out)
    except BudgetError as exc:
        err.write(f"error: {exc}\n")
        if exc.required is not None:
            err.write(f"required steps: {exc.required}\n")
        return EXIT_BUDGET
    except (ValidationError, KeyError, TypeError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))
