"""Activity-detection comparison: ML LSFC estimation vs the discrete-level
posterior-mean denoiser, received powers uniform in +-3 dB around nominal.

Desk-scale version of the detector study; writes one CSV row per
(denoiser, M) with pooled misdetection and false-alarm counts.
"""

import argparse
import sys
import time

import numpy as np

from uramimo import (AmpConfig, DiscretePmeDenoiser, GminAbsolute, MlDenoiser,
                     ImperfectInversion, PilotCodebook, SystemConfig, detect,
                     detection_errors, draw_population,
                     synthesize_pilot_phase)


def run_point(denoiser_kind, M, n_p, n_bits, K_a, rho, trials, seed):
    cfg = SystemConfig(n_p=n_p, n_d=1, pilot_bits=n_bits, msg_bits=n_bits + 1,
                       M=M, K_a=K_a, N0=1.0)
    codebook = PilotCodebook(kind="dft", n_p=n_p, n_bits=n_bits, seed=0)
    policy = ImperfectInversion(rho=rho, err_db=3.0)
    lam = K_a / codebook.size
    if denoiser_kind == "ml":
        den = MlDenoiser(lam=lam, g_min=GminAbsolute(rho * 10 ** -0.3))
    else:
        levels = rho * 10 ** (np.array([-2.0, 0.0, 2.0]) / 10)
        den = DiscretePmeDenoiser(lam=lam, levels=levels,
                                  xi=np.full(3, 1 / 3))
    md = fa = 0
    for t in range(trials):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(M, t)))
        pop = draw_population(cfg, policy, lsfc=None, rng=rng)
        Y = synthesize_pilot_phase(pop, codebook, cfg.N0, rng)
        det = detect(Y, codebook, den, AmpConfig(), k_a=K_a, delta=K_a // 40)
        dmd, dfa = detection_errors(det.indices, pop.pilot_idx)
        md += dmd
        fa += dfa
    return md, fa


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-bits", type=int, default=10)
    ap.add_argument("--n-p", type=int, default=100)
    ap.add_argument("--ka", type=int, default=64)
    ap.add_argument("--rho-db", type=float, default=-10.0)
    ap.add_argument("--ms", default="8:16:24")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    rho = 10 ** (args.rho_db / 10)
    lines = ["denoiser,M,trials,md,fa,p_md_col"]
    for M in (int(x) for x in args.ms.split(":")):
        for kind in ("ml", "pme3"):
            t0 = time.time()
            md, fa = run_point(kind, M, args.n_p, args.n_bits, args.ka,
                               rho, args.trials, args.seed)
            p = md / (args.trials * args.ka)
            lines.append(f"{kind},{M},{args.trials},{md},{fa},{p:.6g}")
            print(f"{kind:5s} M={M:3d}  md={md:5d}  fa={fa:5d}  "
                  f"p_md={p:.4g}  ({time.time() - t0:.0f}s)")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
