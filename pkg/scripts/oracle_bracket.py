"""Bracket the engine's upper expectation between the constant-rate
envelope and a Monte-Carlo replay of the extracted bang-bang policy.

    python3 scripts/oracle_bracket.py --count 10 --samples 200000
"""

import argparse
import time

import numpy as np

from imprecise_poisson import FinitaryVariable, RateInterval, SemigroupConfig, Table
from imprecise_poisson.oracle import constant_rate_envelope, extract_policy, policy_simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rates", default="1,2")
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--h", type=float, default=1e-3, help="policy bucket width")
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rates = RateInterval.parse(args.rates)
    rng = np.random.default_rng(args.seed)
    grid = np.linspace(rates.lower, rates.upper, 5)
    cfg = SemigroupConfig(tol=args.tol)
    print(f"{'#':>3} {'times':>14} {'envelope':>10} {'engine':>10} {'sim mean':>10} {'ci':>9} {'ok':>3}")
    covered = 0
    start = time.perf_counter()
    for i in range(args.count):
        k = 1 + i % 2
        times = tuple(round(float(x), 3) for x in np.sort(rng.uniform(0.2, 1.5, size=k)))
        size = int(rng.integers(4, 9))
        var = FinitaryVariable(times, Table(rng.uniform(0, 1, size=(size,) * k)))
        policy = extract_policy(var, rates, args.h, cfg=cfg)
        env = constant_rate_envelope(var, grid)
        mean, ci = policy_simulate(var, policy, args.samples, seed=args.seed + i)
        ok = env <= policy.engine_value + policy.engine_error and abs(mean - policy.engine_value) <= ci
        covered += ok
        print(f"{i:>3} {str(times):>14} {env:10.6f} {policy.engine_value:10.6f} {mean:10.6f} {ci:9.2e} {'y' if ok else 'n':>3}")
    print(f"bracket holds in {covered}/{args.count} cases ({time.perf_counter() - start:.1f}s)")


if __name__ == "__main__":
    main()
