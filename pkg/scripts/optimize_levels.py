"""Received-power level design: equal-group and grid solutions side by side.

Prints, for a range of group counts and grid spacings, the relative level
pattern, predicted received/transmit power, and the transmit-power gain
over the single-level baseline.
"""

import argparse
import sys

import numpy as np

from uramimo import LsfcModel, required_sinr
from uramimo.optimizer import (OptimizerScenario, power_gain_db, sci_baseline,
                               solve_equal_groups, solve_level_grid)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ka", type=int, default=800)
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--n-p", type=int, default=1152)
    ap.add_argument("--target-sinr-db", type=float, default=None,
                    help="default: normal approximation at 84 bits / 4096 uses")
    ap.add_argument("--groups", default="1:2:3:4")
    ap.add_argument("--spacings", default="2:1:0.5")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.target_sinr_db is None:
        s = required_sinr(84 / 4096, 4096, 0.05)
        src = "normal approximation"
    else:
        s = 10 ** (args.target_sinr_db / 10)
        src = "user supplied"
    print(f"# target sinr = {s:.5f} ({10 * np.log10(s):.3f} dB, {src})")

    sc = OptimizerScenario(K_a=args.ka, M=args.m, n_p=args.n_p, target_sinr=s)
    lsfc = LsfcModel()
    base = sci_baseline(sc, lsfc=lsfc)
    print(f"# baseline received power {10 * np.log10(base.levels[0]):.3f} dB")

    for g in (int(x) for x in args.groups.split(":")):
        plan = solve_equal_groups(sc, g, lsfc=lsfc, seed=args.seed)
        if plan is None:
            print(f"equal G={g}: infeasible")
            continue
        rel = 10 * np.log10(np.asarray(plan.levels) / min(plan.levels))
        print(f"equal G={g}: rel={np.round(rel[::-1], 3)} dB  "
              f"gain={power_gain_db(base, plan):.3f} dB")
    for sp in (float(x) for x in args.spacings.split(":")):
        plan = solve_level_grid(sc, lsfc=lsfc, spacing_db=sp, seed=args.seed)
        if plan is None:
            print(f"grid {sp} dB: infeasible")
            continue
        print(f"grid {sp} dB: {plan.n_levels} occupied  "
              f"xi={np.round(plan.xi, 3)}  "
              f"gain={power_gain_db(base, plan):.3f} dB")
    return 0


if __name__ == "__main__":
    sys.exit(main())
