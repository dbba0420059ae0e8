"""Law-of-large-numbers error of U_B / rho(B) against t^j/j as rho(B) grows.

Fits the log-log slope of the mean sup-error; the fluctuation scale
predicts -1/2.
"""

import argparse
from functools import partial

import numpy as np

from polyascrp.rand_kit import derive_seed
from polyascrp.replicates import run_replicates
from polyascrp.verify import _lln_error


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rho", default="100,300,1000,3000,10000,30000")
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    master = derive_seed(args.seed, "lln_scaling")
    rhos = [float(r) for r in args.rho.split(",")]
    means = []
    for k, rho in enumerate(rhos):
        errs = np.array(run_replicates(partial(_lln_error, rho_b=rho, t=args.t, j_sup=10),
                                       args.reps, master, args.workers, start=k * args.reps))
        means.append(errs.mean())
        frac = np.mean(errs <= 5 / np.sqrt(rho))
        print(f"rho={rho:>8g} mean_sup_err={errs.mean():.5f} "
              f"sqrt(rho)*err={errs.mean() * np.sqrt(rho):.3f} within 5/sqrt(rho): {frac:.2f}")
    slope = np.polyfit(np.log10(rhos), np.log10(means), 1)[0]
    print(f"log-log slope: {slope:.4f}")


if __name__ == "__main__":
    main()
