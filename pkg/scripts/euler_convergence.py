"""Observed Euler error of the semigroup against its a-priori bound.

With a precise rate the exact semigroup is a Poisson-weighted sum, so the
error is measurable directly; with an interval the finest run serves as
the reference.
"""

import argparse

import numpy as np

from imprecise_poisson import LatticeFunction, RateInterval, SemigroupConfig, precise_semigroup_apply, semigroup_apply


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rates", default="1,2")
    ap.add_argument("--delta", type=float, default=1.0)
    ap.add_argument("--size", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rates = RateInterval.parse(args.rates)
    g = LatticeFunction(np.random.default_rng(args.seed).uniform(0, 1, size=args.size))
    tols = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    if rates.is_precise:
        ref = precise_semigroup_apply(g, args.delta, rates.upper).values
    else:
        ref = semigroup_apply(g, args.delta, rates, cfg=SemigroupConfig(tol=tols[-1] / 100)).values
    print(f"{'tol':>8} {'steps':>11} {'bound':>10} {'observed':>10} {'ratio':>7}")
    for tol in tols:
        res = semigroup_apply(g, args.delta, rates, cfg=SemigroupConfig(tol=tol))
        err = float(np.max(np.abs(res.values - ref)))
        print(f"{tol:8.0e} {res.steps:11d} {res.error_bound:10.2e} {err:10.2e} {err / res.error_bound:7.3f}")


if __name__ == "__main__":
    main()
