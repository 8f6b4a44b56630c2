"""Paired-seed comparison of the cancellation strategies.

Runs the same noise/channel/message realizations through receivers with
no SIC, grouped SIC, and full SIC, and reports per-user error rates.
"""

import argparse
import sys

from uramimo import Scenario
from uramimo.harness import run_trial
import numpy as np


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ka", type=int, default=32)
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--power-db", type=float, default=-12.5)
    ap.add_argument("--groups", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = dict(name="sic", n_p=288, n_d=512, pilot_bits=12, msg_bits=96,
                M=args.m, K_a=args.ka, power_db=args.power_db,
                policy={"kind": "imperfect_inversion", "err_db": 3.0},
                list_size=16, design_snr_db=-6.0)
    # grouped division points relative to nominal received power
    div = [args.power_db + d for d in (1.5, 0.0, -1.5)][:args.groups - 1]
    variants = {
        "no-sic": dict(base, sic={"kind": "none"}),
        "grouped": dict(base, sic={"kind": "grouped", "division_db": div}),
        "full": dict(base, sic={"kind": "full"}),
    }
    errs = {k: 0 for k in variants}
    for t in range(args.trials):
        seq = np.random.SeedSequence(entropy=args.seed, spawn_key=(0, t))
        for k, d in variants.items():
            r = run_trial(Scenario.from_dict(d), seq)
            errs[k] += r.n_md + r.n_fa
    denom = args.trials * args.ka
    for k, e in errs.items():
        print(f"{k:8s} errors={e:5d}  rate={e / denom:.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
