"""Campaign orchestration: scenario configs, seeded Monte-Carlo runs,
metric aggregation and the command-line entry point.

A scenario JSON describes one end-to-end system; a campaign sweeps one or
more scenario fields, runs seeded trials per point and writes a metrics
CSV next to a sidecar file with the fully resolved configuration. Seeds
derive from (seed_base, point index, trial index) so any subset of
trials can be reproduced in isolation and aggregation is order-free.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import analysis
from .amp import (AmpConfig, DiscretePmeDenoiser, GminAbsolute,
                  GminTauMultiple, MlDenoiser, detect, detection_errors)
from .channel import (FullInversion, ImperfectInversion, LsfcModel,
                      NoPowerControl, PartialInversion, SystemConfig,
                      draw_population, synthesize_data_phase,
                      synthesize_pilot_phase)
from .pilots import PilotCodebook
from .polar import PolarCodec
from .receiver import FullSic, GroupedSic, NoSic, run_receiver


class ConfigError(ValueError):
    """Scenario schema violation; message starts with the field path."""


def _get(d: dict, key: str, path: str, typ=None, default=...):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}{key}: missing required field")
        return default
    val = d[key]
    if typ is not None and not isinstance(val, typ):
        raise ConfigError(f"{path}{key}: expected {typ}, got {type(val).__name__}")
    return val


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """Resolved description of one simulated system configuration."""

    name: str
    n_p: int
    n_d: int
    pilot_bits: int
    msg_bits: int
    M: int
    K_a: int
    power_db: float = 0.0           # policy scale: received (inversion) or transmit
    N0: float = 1.0
    pilot_kind: str = "dft"
    pilot_seed: int = 0
    policy: dict = field(default_factory=lambda: {"kind": "full_inversion"})
    lsfc: dict | None = None
    denoiser: dict = field(default_factory=lambda: {"kind": "ml"})
    g_min: dict = field(default_factory=lambda: {"kind": "tau", "multiple": 2.0})
    delta: int | None = None        # None -> floor(K_a/40)
    sic: dict = field(default_factory=lambda: {"kind": "none"})
    list_size: int = 32
    design_snr_db: float = -12.0
    amp_iters: int = 20
    noise_mode: str = "analytic"

    def __post_init__(self) -> None:
        if self.msg_bits <= self.pilot_bits:
            raise ConfigError("msg_bits: must exceed pilot_bits")
        if self.sic.get("kind") not in ("none", "grouped", "full"):
            raise ConfigError(f"sic.kind: unknown {self.sic.get('kind')!r}")
        if self.denoiser.get("kind") not in ("ml", "pme"):
            raise ConfigError(f"denoiser.kind: unknown {self.denoiser.get('kind')!r}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict, path: str = "") -> "Scenario":
        known = {f for f in cls.__dataclass_fields__}
        for key in d:
            if key not in known:
                raise ConfigError(f"{path}{key}: unknown field")
        kwargs = {}
        for key in ("name",):
            kwargs[key] = _get(d, key, path, str)
        for key in ("n_p", "n_d", "pilot_bits", "msg_bits", "M", "K_a"):
            kwargs[key] = _get(d, key, path, int)
        for key, typ in (("power_db", (int, float)), ("N0", (int, float)),
                         ("pilot_kind", str), ("pilot_seed", int),
                         ("policy", dict), ("lsfc", (dict, type(None))),
                         ("denoiser", dict), ("g_min", dict), ("delta", (int, type(None))),
                         ("sic", dict), ("list_size", int),
                         ("design_snr_db", (int, float)), ("amp_iters", int),
                         ("noise_mode", str)):
            if key in d:
                kwargs[key] = _get(d, key, path, typ)
        return cls(**kwargs)

    # -- builders ----------------------------------------------------------

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(n_p=self.n_p, n_d=self.n_d,
                            pilot_bits=self.pilot_bits, msg_bits=self.msg_bits,
                            M=self.M, K_a=self.K_a, N0=self.N0)

    @property
    def power(self) -> float:
        return 10.0 ** (self.power_db / 10.0)

    def build_codebook(self) -> PilotCodebook:
        return PilotCodebook(kind=self.pilot_kind, n_p=self.n_p,
                             n_bits=self.pilot_bits, seed=self.pilot_seed)

    def build_codec(self) -> PolarCodec:
        return PolarCodec(n_code=2 * self.n_d,
                          payload_bits=self.msg_bits - self.pilot_bits,
                          list_size=self.list_size,
                          design_snr_db=self.design_snr_db)

    def build_lsfc(self) -> LsfcModel | None:
        if self.lsfc is None:
            return None
        allowed = {"alpha", "beta", "shadow_std_db", "r_min_km", "r_max_km",
                   "g_max_db"}
        for key in self.lsfc:
            if key not in allowed:
                raise ConfigError(f"lsfc.{key}: unknown field")
        return LsfcModel(**self.lsfc)

    def build_policy(self, power: float | None = None):
        p = self.power if power is None else power
        kind = _get(self.policy, "kind", "policy.", str)
        if kind == "npc":
            return NoPowerControl(p_tx=p)
        if kind == "full_inversion":
            return FullInversion(rho=p)
        if kind == "imperfect_inversion":
            err = _get(self.policy, "err_db", "policy.", (int, float))
            return ImperfectInversion(rho=p, err_db=float(err))
        if kind == "partial_inversion":
            corners = _get(self.policy, "corners_db", "policy.", list)
            levels = _get(self.policy, "levels", "policy.", list)
            xi = _get(self.policy, "xi", "policy.", list)
            return PartialInversion(corners_db=tuple(corners),
                                    levels=tuple(np.asarray(levels) * p),
                                    xi=tuple(xi))
        raise ConfigError(f"policy.kind: unknown {kind!r}")

    def _gmin(self, power: float):
        kind = _get(self.g_min, "kind", "g_min.", str)
        if kind == "tau":
            return GminTauMultiple(float(self.g_min.get("multiple", 2.0)))
        if kind == "absolute":
            rel = float(_get(self.g_min, "rel_db", "g_min.", (int, float)))
            return GminAbsolute(power * 10.0 ** (rel / 10.0))
        raise ConfigError(f"g_min.kind: unknown {kind!r}")

    def build_denoiser(self, power: float | None = None):
        p = self.power if power is None else power
        # clamp into the open interval so K_a = 0 sanity runs stay defined
        lam = min(max(self.K_a / (1 << self.pilot_bits), 1e-12), 1.0 - 1e-12)
        kind = self.denoiser["kind"]
        if kind == "ml":
            return MlDenoiser(lam=lam, g_min=self._gmin(p))
        levels_rel_db = _get(self.denoiser, "levels_rel_db", "denoiser.", list)
        xi = self.denoiser.get("xi")
        levels = p * 10.0 ** (np.asarray(levels_rel_db, dtype=float) / 10.0)
        xi = np.full(levels.size, 1.0 / levels.size) if xi is None else np.asarray(xi)
        return DiscretePmeDenoiser(lam=lam, levels=levels, xi=xi)

    def build_strategy(self):
        kind = self.sic["kind"]
        if kind == "none":
            return NoSic()
        if kind == "full":
            return FullSic()
        division = _get(self.sic, "division_db", "sic.", list)
        return GroupedSic(division_db=tuple(division))

    @property
    def delta_eff(self) -> int:
        return self.K_a // 40 if self.delta is None else self.delta


# ---------------------------------------------------------------------------
# Single trial
# ---------------------------------------------------------------------------

@dataclass
class TrialResult:
    n_md: int
    n_fa: int
    list_size: int
    ad_md: int
    ad_fa: int
    iterations: int
    wall_s: float


def score_messages(messages, pop) -> tuple:
    """(n_md, n_fa, |L|) against the ground-truth message set."""
    truth = {pop.messages[k].tobytes() for k in range(pop.messages.shape[0])}
    got = {np.asarray(m, dtype=np.uint8).tobytes() for m in messages}
    n_md = len(truth - got)
    n_fa = len(got - truth)
    return n_md, n_fa, len(got)


def run_trial(sc: Scenario, seed_seq: np.random.SeedSequence,
              power: float | None = None,
              shared: dict | None = None) -> TrialResult:
    """One synthesize -> detect -> receive -> score pass."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed_seq)
    shared = shared if shared is not None else {}
    codebook = shared.get("codebook") or sc.build_codebook()
    codec = shared.get("codec") or sc.build_codec()
    lsfc = sc.build_lsfc()
    policy = sc.build_policy(power)
    cfg = sc.system

    pop = draw_population(cfg, policy, lsfc=lsfc, rng=rng)
    symbols = np.stack([codec.encode(pop.messages[k, cfg.pilot_bits:])
                        for k in range(cfg.K_a)]) if cfg.K_a else \
        np.zeros((0, cfg.n_d), dtype=complex)
    Y_p = synthesize_pilot_phase(pop, codebook, cfg.N0, rng)
    Y_d = synthesize_data_phase(pop, symbols, cfg.N0, rng)

    det = detect(Y_p, codebook, sc.build_denoiser(power),
                 AmpConfig(max_iters=sc.amp_iters),
                 k_a=cfg.K_a, delta=sc.delta_eff)
    ad_md, ad_fa = detection_errors(det.indices, pop.pilot_idx)
    res = run_receiver(Y_p, Y_d, codebook, codec, det,
                       strategy=sc.build_strategy(), N0=cfg.N0,
                       noise_mode=sc.noise_mode)
    n_md, n_fa, nlist = score_messages(res.messages, pop)
    assert nlist == n_fa + cfg.K_a - n_md
    return TrialResult(n_md=n_md, n_fa=n_fa, list_size=nlist,
                       ad_md=ad_md, ad_fa=ad_fa,
                       iterations=det.iterations,
                       wall_s=time.perf_counter() - t0)


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple:
    """(center, halfwidth) of the Wilson score interval."""
    if n == 0:
        return float("nan"), float("nan")
    phat = k / n
    denom = 1.0 + z**2 / n
    center = (phat + z**2 / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z**2 / (4 * n**2)) / denom
    return center, half


# ---------------------------------------------------------------------------
# Campaign
# ---------------------------------------------------------------------------

FIELDNAMES = ["scenario", "point", "param", "value", "trials", "failures",
              "seed_base", "build_id", "n_md", "n_fa", "list_mean", "p_md",
              "p_md_lo", "p_md_hi", "p_fa", "p_fa_lo", "p_fa_hi", "ad_md",
              "ad_fa", "iters_mean", "wall_s"]

_POINT_CACHE: dict = {}     # per-process codebook/codec reuse


def _shared_for(sc: Scenario) -> dict:
    key = (sc.pilot_kind, sc.n_p, sc.pilot_bits, sc.pilot_seed,
           sc.n_d, sc.msg_bits, sc.list_size, sc.design_snr_db)
    if key not in _POINT_CACHE:
        _POINT_CACHE.clear()
        _POINT_CACHE[key] = {"codebook": sc.build_codebook(),
                             "codec": sc.build_codec()}
    return _POINT_CACHE[key]


def _run_point(args):
    sc_dict, seed_base, point_idx, trial_idx = args
    sc = Scenario.from_dict(sc_dict)
    seq = np.random.SeedSequence(entropy=seed_base,
                                 spawn_key=(point_idx, trial_idx))
    try:
        r = run_trial(sc, seq, shared=_shared_for(sc))
    except Exception as exc:            # recorded; the campaign continues
        return ("fail", repr(exc))
    return (r.n_md, r.n_fa, r.list_size, r.ad_md, r.ad_fa, r.iterations,
            r.wall_s)


def run_campaign(config: dict, out_dir, seed: int | None = None,
                 trials: int | None = None, threads: int = 0,
                 progress=None) -> list:
    """Sweep points, aggregate rows, write CSV plus resolved sidecar.

    Points already present in the output CSV are skipped, so an
    interrupted campaign resumes where it stopped.
    """
    import pathlib
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    base = dict(_get(config, "scenario", "", dict))
    name = _get(config, "name", "", str, base.get("name", "campaign"))
    sweep = _get(config, "sweep", "", dict, {})
    param = _get(sweep, "param", "sweep.", str, None) if sweep else None
    values = _get(sweep, "values", "sweep.", list, [None]) if sweep else [None]
    n_trials = trials if trials is not None else _get(config, "trials", "", int, 100)
    seed_base = seed if seed is not None else _get(config, "seed", "", int, 0)

    resolved = {"name": name, "scenario": base, "sweep": sweep,
                "trials": n_trials, "seed": seed_base}
    blob = json.dumps(resolved, sort_keys=True).encode()
    build_id = hashlib.sha1(blob).hexdigest()[:10]
    csv_path = out_dir / f"{name}.csv"
    (out_dir / f"{name}.config.json").write_text(json.dumps(resolved, indent=2))

    done = set()
    if csv_path.exists():
        with open(csv_path) as fh:
            for row in csv.DictReader(fh):
                done.add(row["point"])
        mode = "a"
    else:
        mode = "w"

    rows = []
    with open(csv_path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIELDNAMES)
        if mode == "w":
            writer.writeheader()
        for pi, val in enumerate(values):
            point = f"{param}={val}" if param else "single"
            if point in done:
                continue
            sc_dict = dict(base)
            if param is not None:
                sc_dict[param] = val
            jobs = [(sc_dict, seed_base, pi, ti) for ti in range(n_trials)]
            if threads > 1:
                with concurrent.futures.ProcessPoolExecutor(threads) as ex:
                    results = list(ex.map(_run_point, jobs, chunksize=4))
            else:
                results = [_run_point(j) for j in jobs]
            failures = [r[1] for r in results if r[0] == "fail"]
            for msg in failures:
                print(f"trial failure at {point}: {msg}", file=sys.stderr)
            results = [r for r in results if r[0] != "fail"]
            if not results:
                raise RuntimeError(f"every trial failed at {point}: "
                                   f"{failures[0]}")
            agg = np.array(results, dtype=float)
            n_ok = len(results)
            K_a = sc_dict["K_a"]
            n_md, n_fa = int(agg[:, 0].sum()), int(agg[:, 1].sum())
            if K_a > 0:
                c, h = wilson_interval(n_md, n_ok * K_a)
                p_md = f"{n_md / (n_ok * K_a):.6g}"
                p_md_lo, p_md_hi = f"{max(c - h, 0):.6g}", f"{c + h:.6g}"
            else:
                p_md = p_md_lo = p_md_hi = "NA"
            fa_rates = np.divide(agg[:, 1], agg[:, 2], where=agg[:, 2] > 0,
                                 out=np.zeros(len(agg)))
            p_fa = float(np.mean(fa_rates))
            fa_half = float(1.96 * np.std(fa_rates) / np.sqrt(n_ok))
            row = {"scenario": name, "point": point, "param": param or "",
                   "value": val if val is not None else "",
                   "trials": n_trials, "failures": len(failures),
                   "seed_base": seed_base,
                   "build_id": build_id, "n_md": n_md, "n_fa": n_fa,
                   "list_mean": f"{agg[:, 2].mean():.4f}",
                   "p_md": p_md, "p_md_lo": p_md_lo, "p_md_hi": p_md_hi,
                   "p_fa": f"{p_fa:.6g}",
                   "p_fa_lo": f"{max(p_fa - fa_half, 0):.6g}",
                   "p_fa_hi": f"{p_fa + fa_half:.6g}",
                   "ad_md": int(agg[:, 3].sum()), "ad_fa": int(agg[:, 4].sum()),
                   "iters_mean": f"{agg[:, 5].mean():.3f}",
                   "wall_s": f"{agg[:, 6].sum():.2f}"}
            writer.writerow(row)
            fh.flush()
            rows.append(row)
            if progress:
                progress(row)
    return rows


# ---------------------------------------------------------------------------
# Required-power search
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    power_db: float
    ebn0_db: float
    pe: float
    pe_half: float
    probes: list
    widened: bool = False


def ebn0_db_of(power_db: float, n: int, B: int, N0: float) -> float:
    """E_b/N_0 [dB] of per-symbol power P over n uses carrying B bits."""
    return power_db + 10.0 * np.log10(n / (B * N0))


def _measure_pe(sc: Scenario, power_db: float, trials: int, seed_base: int,
                shared: dict) -> tuple:
    errs = 0
    kas = 0
    for ti in range(trials):
        seq = np.random.SeedSequence(entropy=seed_base,
                                     spawn_key=(int(round(power_db * 100)) & 0xFFFF, ti))
        r = run_trial(sc, seq, power=10.0 ** (power_db / 10.0), shared=shared)
        errs += r.n_md + r.n_fa
        kas += sc.K_a
    return wilson_interval(errs, kas)


def ebn0_search(sc: Scenario, target_pe: float = 0.05,
                bracket_db=(-14.0, -4.0), trials: int = 100,
                seed: int = 0, iters: int = 8,
                measure=None) -> SearchResult:
    """Bisect transmit power for p_md + p_fa <= target.

    measure(power_db) -> (pe, halfwidth) may be injected (analysis mode or
    tests); the default runs seeded trials. A non-monotone or non-bracketing
    interval is widened once on each side before giving up.
    """
    shared = {"codebook": sc.build_codebook(), "codec": sc.build_codec()}
    if measure is None:
        def measure(p_db):
            return _measure_pe(sc, p_db, trials, seed, shared)

    cfg = sc.system
    lo, hi = bracket_db
    probes = []
    if target_pe >= 1.0:        # met everywhere; the bracket floor wins
        pe_lo, half = measure(lo)
        probes.append((lo, pe_lo))
        return SearchResult(power_db=lo,
                            ebn0_db=ebn0_db_of(lo, cfg.n, sc.msg_bits, sc.N0),
                            pe=pe_lo, pe_half=half, probes=probes)

    widened = False
    pe_lo, _ = measure(lo)
    pe_hi, half_hi = measure(hi)
    probes += [(lo, pe_lo), (hi, pe_hi)]
    for _ in range(2):
        if pe_hi > target_pe:
            hi += (hi - lo)
            pe_hi, half_hi = measure(hi)
            probes.append((hi, pe_hi))
            widened = True
        elif pe_lo <= target_pe:
            lo -= (hi - lo)
            pe_lo, _ = measure(lo)
            probes.append((lo, pe_lo))
            widened = True
        else:
            break
    if pe_hi > target_pe:
        raise RuntimeError(
            f"target {target_pe} unreachable up to {hi:.1f} dB "
            f"(pe {pe_hi:.3f} after widening)")
    if pe_lo <= target_pe:      # even the widened floor meets the target
        return SearchResult(power_db=lo,
                            ebn0_db=ebn0_db_of(lo, cfg.n, sc.msg_bits, sc.N0),
                            pe=pe_lo, pe_half=0.0, probes=probes,
                            widened=True)
    pe_at_hi, half_at_hi = pe_hi, half_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pe_mid, half = measure(mid)
        probes.append((mid, pe_mid))
        if pe_mid > target_pe:
            lo = mid
        else:
            hi, pe_at_hi, half_at_hi = mid, pe_mid, half
    return SearchResult(power_db=hi,
                        ebn0_db=ebn0_db_of(hi, cfg.n, sc.msg_bits, sc.N0),
                        pe=pe_at_hi, pe_half=half_at_hi, probes=probes,
                        widened=widened)


# ---------------------------------------------------------------------------
# Closed-form prediction (no Monte-Carlo link runs)
# ---------------------------------------------------------------------------

def predict_pe(sc: Scenario, power_db: float, curve,
               n_subsets: int = 32, seed: int = 1) -> float:
    """Error probability from the interference analysis plus a code curve.

    Perfect-inversion assumption: every user is received at the scenario
    power. Channel-error variances come from the exact estimation error
    covariance averaged over random pilot subsets; the code curve, taken
    over the finite-M post-MRC SINR fluctuation, maps the mean SINR to an
    error rate; pilot collisions add their floor.
    """
    if sc.K_a == 0:
        return 0.0
    p = 10.0 ** (power_db / 10.0)
    codebook = sc.build_codebook()
    rng = np.random.default_rng(seed)
    sig = []
    gam = np.full(sc.K_a, p)
    for _ in range(n_subsets):
        idx = rng.choice(codebook.size, size=sc.K_a, replace=False)
        A = codebook.columns(idx)
        sig.append(analysis.error_cov_diag(A, gam, sc.N0))
    sigma2 = float(np.mean(sig))
    sinr = analysis.sinr_no_sic(gam, np.full(sc.K_a, sigma2), sc.N0, sc.M)[0]
    den = sc.N0 + sigma2 * p + (sc.K_a - 1) * p
    pe_code = analysis.fading_average_pe(
        curve, sinr, sc.M, sigma2=sigma2, interferers=sc.K_a - 1,
        interference_share=(sc.K_a - 1) * p / den)
    n_coll = (sc.K_a - 1) / (1 << sc.pilot_bits)
    return n_coll + (1.0 - n_coll) * pe_code


def required_power_db(sc: Scenario, curve, target_pe: float = 0.05,
                      lo_db: float = -20.0, hi_db: float = 5.0,
                      tol_db: float = 0.02) -> float:
    """Smallest power meeting the predicted error target."""
    if predict_pe(sc, hi_db, curve) > target_pe:
        raise RuntimeError("prediction infeasible at bracket top")
    while hi_db - lo_db > tol_db:
        mid = 0.5 * (lo_db + hi_db)
        if predict_pe(sc, mid, curve) > target_pe:
            lo_db = mid
        else:
            hi_db = mid
    return hi_db


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    with open(args.config) as fh:
        config = json.load(fh)
    rows = run_campaign(config, args.out, seed=args.seed, trials=args.trials,
                        threads=args.threads,
                        progress=lambda r: print(f"{r['point']}: "
                                                 f"p_md={r['p_md']} p_fa={r['p_fa']}"))
    print(f"{len(rows)} point(s) written to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    from .polar import measure_pe_curve
    with open(args.config) as fh:
        config = json.load(fh)
    sc = Scenario.from_dict(_get(config, "scenario", "", dict))
    an = _get(config, "analysis", "", dict, {})
    target = float(an.get("target_pe", 0.05))
    codec = sc.build_codec()
    snr_grid = np.asarray(an.get("curve_snr_db",
                                 np.arange(-10.5, -2.9, 0.5).tolist()))
    _, curve = measure_pe_curve(codec, snr_grid,
                                trials=int(an.get("curve_trials", 300)),
                                seed=args.seed or 0)
    p_req = required_power_db(sc, curve, target_pe=target)
    ebn0 = ebn0_db_of(p_req, sc.system.n, sc.msg_bits, sc.N0)
    out = {"scenario": sc.name, "target_pe": target,
           "required_power_db": round(p_req, 4),
           "ebn0_db": round(ebn0, 4),
           "curve_snr_db": snr_grid.tolist()}
    text = json.dumps(out, indent=2)
    if args.out:
        import pathlib
        pathlib.Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_optimize(args) -> int:
    from .optimizer import (OptimizerScenario, sci_baseline,
                            solve_equal_groups, solve_level_grid)
    with open(args.config) as fh:
        config = json.load(fh)
    oc = _get(config, "optimizer", "", dict)
    sc = OptimizerScenario(K_a=_get(oc, "K_a", "optimizer.", int),
                           M=_get(oc, "M", "optimizer.", int),
                           n_p=_get(oc, "n_p", "optimizer.", int),
                           target_sinr=_get(oc, "target_sinr", "optimizer.",
                                            (int, float)),
                           target_pe=oc.get("target_pe", 0.05),
                           N0=oc.get("N0", 1.0))
    lsfc_spec = config.get("lsfc")
    lsfc = LsfcModel(**lsfc_spec) if lsfc_spec else None
    method = oc.get("method", "equal_groups")
    if method == "equal_groups":
        plan = solve_equal_groups(sc, int(oc.get("n_groups", 3)), lsfc=lsfc,
                                  seed=args.seed or 0)
    elif method == "level_grid":
        plan = solve_level_grid(sc, lsfc=lsfc,
                                spacing_db=float(oc.get("spacing_db", 1.0)),
                                seed=args.seed or 0)
    elif method == "sci":
        plan = sci_baseline(sc, lsfc=lsfc)
    else:
        raise ConfigError(f"optimizer.method: unknown {method!r}")
    if plan is None:
        print("infeasible: no converged plan", file=sys.stderr)
        return 2
    text = plan.to_json()
    if args.out:
        import pathlib
        pathlib.Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_codec(args) -> int:
    from .polar import measure_pe_curve
    codec = PolarCodec(n_code=args.n_code, payload_bits=args.payload_bits,
                       list_size=args.list_size,
                       design_snr_db=args.design_snr_db)
    if args.encode or args.decode:
        return _codec_files(codec, args)
    lo, hi, step = (float(x) for x in args.snr_db.split(":"))
    grid = np.arange(lo, hi + 1e-9, step)
    errs, curve = measure_pe_curve(codec, grid, trials=args.trials,
                                   seed=args.seed or 0)
    lines = ["snr_db,errors,trials,pe"]
    for s, e in zip(grid, errs):
        lines.append(f"{s:.3f},{e},{args.trials},{e / args.trials:.6g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        import pathlib
        pathlib.Path(args.out).write_text(text)
    print(text, end="")
    print(f"# required snr_db @ pe=0.05: {curve.required_snr_db(0.05):.3f}",
          file=sys.stderr)
    return 0


def _codec_files(codec: PolarCodec, args) -> int:
    """File mode: one payload (0/1 string) or one LLR row per input line."""
    import pathlib
    out_lines = []
    if args.encode:
        for ln, line in enumerate(pathlib.Path(args.encode).read_text().split()):
            bits = np.array([int(c) for c in line], dtype=np.uint8)
            if bits.size != codec.payload_bits:
                raise ConfigError(f"encode line {ln}: expected "
                                  f"{codec.payload_bits} bits, got {bits.size}")
            out_lines.append("".join(map(str, codec.encode_bits(bits))))
    else:
        for line in pathlib.Path(args.decode).read_text().splitlines():
            if not line.strip():
                continue
            llrs = np.array([float(x) for x in line.split()])
            if llrs.size != codec.n_code:
                raise ConfigError(f"decode: expected {codec.n_code} LLRs, "
                                  f"got {llrs.size}")
            survivors = codec.decode_llrs(llrs)
            out_lines.append("".join(map(str, survivors[0][0]))
                             if survivors else "FAIL")
    text = "\n".join(out_lines) + "\n"
    if args.out:
        pathlib.Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="uramimo",
                                 description="link simulator and analysis CLI")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Monte-Carlo campaign from a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=0)
    p_run.set_defaults(func=_cmd_run)

    p_an = sub.add_parser("analyze", help="closed-form required power")
    p_an.add_argument("--config", required=True)
    p_an.add_argument("--out", default=None)
    p_an.add_argument("--seed", type=int, default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_opt = sub.add_parser("optimize", help="received-power level design")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--out", default=None)
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.set_defaults(func=_cmd_optimize)

    p_cod = sub.add_parser("codec", help="standalone code error-rate curve")
    p_cod.add_argument("--n-code", dest="n_code", type=int, default=1024)
    p_cod.add_argument("--payload-bits", dest="payload_bits", type=int,
                       default=84)
    p_cod.add_argument("--list-size", dest="list_size", type=int, default=32)
    p_cod.add_argument("--design-snr-db", dest="design_snr_db", type=float,
                       default=-6.0)
    p_cod.add_argument("--snr-db", dest="snr_db", default="-8:-3:0.5",
                       help="lo:hi:step in dB")
    p_cod.add_argument("--trials", type=int, default=200)
    p_cod.add_argument("--encode", default=None, metavar="FILE",
                       help="encode payload-bit lines instead of sweeping")
    p_cod.add_argument("--decode", default=None, metavar="FILE",
                       help="decode LLR lines instead of sweeping")
    p_cod.add_argument("--out", default=None)
    p_cod.add_argument("--seed", type=int, default=None)
    p_cod.set_defaults(func=_cmd_codec)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
