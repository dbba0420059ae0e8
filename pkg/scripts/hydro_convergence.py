"""RK4 error for the hydrodynamic ODE as the step shrinks.

Prints the max error against t^j/j and the ratio between consecutive
halvings (about 16 for a fourth-order scheme).  Steps above the stability
limit (roughly 2.8 (1 - t) / J_max) are reported as unstable.
"""

import argparse

from polyascrp.hydro_fluct import HydroInstabilityError, hydro_integrate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=0.9)
    ap.add_argument("--jmax", type=int, default=60)
    ap.add_argument("--steps", default="0.02,0.01,0.005,0.0025,0.00125,0.000625")
    args = ap.parse_args()
    prev = None
    print(f"{'step':>10} {'max_err':>12} {'ratio':>8}")
    for h in map(float, args.steps.split(",")):
        try:
            err = hydro_integrate(args.t_end, args.jmax, h).max_abs_error()
        except HydroInstabilityError:
            print(f"{h:>10g} {'unstable':>12}")
            prev = None
            continue
        ratio = f"{prev / err:8.2f}" if prev else ""
        print(f"{h:>10g} {err:12.3e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
