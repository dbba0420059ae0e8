"""Empirical answers for the single-particle laws of the multiplicity walk.

1. Step of a size-j table over (s, t]: compared with NB(j, (t-s)/(1-s))
   and NB(j, (t-s)/(1-t)) by chi-square.
2. Sizes at t of tables opened during (s, t]: compared with log-series
   ((t-s)/(1-s)) and with a geometric law of the same mean.
"""

import argparse

import numpy as np

from polyascrp import mprw
from polyascrp.rand_kit import NegativeBinomial, RngStream, derive_seed
from polyascrp.stats_harness import chi_square_gof, histogram


def _collect(fn, n):
    out = []
    while len(out) < n:
        out.extend(fn())
    return np.array(out[:n])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rho", type=float, default=3.0)
    ap.add_argument("--s", type=float, default=0.3)
    ap.add_argument("--t", type=float, default=0.6)
    ap.add_argument("--n", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    s, t = args.s, args.t
    rng = RngStream(derive_seed(args.seed, "particle_laws"))

    for j in (1, 2, 4):
        steps = _collect(lambda: mprw.tracked_steps(j, args.rho, s, t, rng), args.n)
        obs = histogram(steps, int(steps.max()) + 2)
        for label, z in (("(t-s)/(1-s)", (t - s) / (1 - s)), ("(t-s)/(1-t)", (t - s) / (1 - t))):
            if z >= 1:
                print(f"j={j} NB(j, {label}): parameter {z:.3f} >= 1, not a law")
                continue
            rep = chi_square_gof(obs, NegativeBinomial(j, z).pmf)
            print(f"j={j} NB(j, {label}={z:.4f}): chi2={rep.statistic:.1f} p={rep.p_value:.3g}")

    sizes = _collect(lambda: mprw.simulate_event_profiles(args.rho, t, rng, birth_after=s)[1], args.n)
    obs = histogram(sizes, int(sizes.max()) + 2)
    law = mprw.entry_size_law(s, t)
    rep = chi_square_gof(obs, law.pmf)
    print(f"entry sizes vs log-series({law.t:.4f}): chi2={rep.statistic:.1f} p={rep.p_value:.3g}")
    p = 1 / law.mean
    geo = lambda k: np.where(np.asarray(k) >= 1, p * (1 - p) ** (np.asarray(k) - 1.0), 0.0)
    rep = chi_square_gof(obs, geo)
    print(f"entry sizes vs geometric(mean {law.mean:.4f}): chi2={rep.statistic:.1f} p={rep.p_value:.3g}")
    print(f"empirical mean size {sizes.mean():.4f}")


if __name__ == "__main__":
    main()
