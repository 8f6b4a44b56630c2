"""Channel estimation, MRC soft symbols and the cancellation receiver."""

import numpy as np
import pytest

from uramimo.amp import AmpConfig, DetectionResult, MlDenoiser, detect
from uramimo.channel import (FullInversion, SystemConfig, draw_population,
                             synthesize_data_phase, synthesize_pilot_phase)
from uramimo.harness import score_messages
from uramimo.pilots import build_pilots
from uramimo.polar import PolarCodec
from uramimo.receiver import (FullSic, GroupedSic, NoSic, estimate_row_scale_noise,
                              group_rows, lmmse_estimate, mrc_soft_symbols,
                              run_receiver)


def _cngen(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# LMMSE estimator
# ---------------------------------------------------------------------------

def test_lmmse_orthogonal_error_matches_closed_form():
    """Distinct columns of a square DFT codebook are orthogonal, so the
    error variance must equal N0/(N0 + n_p*gamma) exactly."""
    n_p = 32
    cb = build_pilots("dft", n_p=n_p, n_bits=5, seed=0)
    rng = np.random.default_rng(1)
    gamma = np.array([0.4, 0.1, 2.0])
    idx = np.array([3, 17, 29])
    A = cb.columns(idx)
    H = _cngen(rng, 3, 4)
    Y = A @ (np.sqrt(gamma)[:, None] * H) + np.sqrt(0.5) * _cngen(rng, n_p, 4)
    est = lmmse_estimate(Y, A, gamma, N0=0.5)
    want = 0.5 / (0.5 + n_p * gamma)
    assert np.allclose(est.sigma2, want, rtol=1e-9)


def test_lmmse_error_variance_monte_carlo():
    """sigma2 = 0.1 when n_p*gamma/N0 = 9; verified against redraws."""
    n_p, M, trials = 16, 2, 4000
    cb = build_pilots("dft", n_p=n_p, n_bits=4, seed=2)
    gamma = np.array([9.0 / n_p])
    a = cb.columns(np.array([5]))
    rng = np.random.default_rng(3)
    acc = 0.0
    for _ in range(trials):
        H = _cngen(rng, 1, M)
        Y = a @ (np.sqrt(gamma)[:, None] * H) + _cngen(rng, n_p, M)
        est = lmmse_estimate(Y, a, gamma, N0=1.0)
        assert est.sigma2[0] == pytest.approx(0.1)
        # estimate is of the unit-variance channel itself
        acc += np.mean(np.abs(est.H_hat[0] - H[0]) ** 2)
    emp = acc / trials
    assert emp == pytest.approx(0.1, rel=0.05)


def test_lmmse_noiseless_recovers_channel():
    n_p = 64
    cb = build_pilots("gaussian", n_p=n_p, n_bits=6, seed=4)
    rng = np.random.default_rng(5)
    idx = np.array([1, 9, 40])
    gamma = np.array([1.0, 0.3, 5.0])
    A = cb.columns(idx)
    H = _cngen(rng, 3, 8)
    Y = A @ (np.sqrt(gamma)[:, None] * H)
    est = lmmse_estimate(Y, A, gamma, N0=1e-12)
    assert np.allclose(est.H_hat, H, atol=1e-4)
    assert np.all(est.sigma2 < 1e-9)


# ---------------------------------------------------------------------------
# MRC
# ---------------------------------------------------------------------------

def test_mrc_aligns_own_symbols():
    """With a perfect channel estimate the soft symbols correlate with the
    sent QPSK stream at unit phase."""
    rng = np.random.default_rng(6)
    M, n_d = 64, 128
    bits = rng.integers(0, 2, 2 * n_d)
    c = ((1 - 2.0 * bits[0::2]) + 1j * (1 - 2.0 * bits[1::2])) / np.sqrt(2)
    h = _cngen(rng, 1, M)
    gamma = np.array([0.7])
    Y_d = np.sqrt(gamma[0]) * np.outer(c, h[0])
    S = mrc_soft_symbols(Y_d, h, gamma)
    corr = np.vdot(np.conj(S[0]), c) / (np.linalg.norm(S) * np.linalg.norm(c))
    assert abs(corr) > 0.999999
    assert corr.real > 0.999999


def test_mrc_rejects_other_users_with_many_antennas():
    rng = np.random.default_rng(7)
    M, n_d = 512, 64
    h1, h2 = _cngen(rng, 1, M), _cngen(rng, 1, M)
    c2 = np.exp(2j * np.pi * rng.random(n_d))
    leak = mrc_soft_symbols(np.outer(c2, h2[0]), h1, np.array([1.0]))
    own = mrc_soft_symbols(np.outer(c2, h1[0]), h1, np.array([1.0]))
    # cross-user leakage is down by a factor M relative to the own signal
    ratio = np.mean(np.abs(leak) ** 2) / np.mean(np.abs(own) ** 2)
    assert ratio < 10.0 / M


def test_mrc_zero_row_gives_zero():
    S = mrc_soft_symbols(np.zeros((16, 4), dtype=complex),
                         np.zeros((1, 4), dtype=complex), np.array([0.0]))
    assert np.all(S == 0)


def test_scale_noise_estimator_high_snr():
    rng = np.random.default_rng(8)
    bits = rng.integers(0, 2, 1024)
    c = ((1 - 2.0 * bits[0::2]) + 1j * (1 - 2.0 * bits[1::2])) / np.sqrt(2)
    row = 3.0 * c + 0.05 * _cngen(rng, 512)
    amp, v = estimate_row_scale_noise(row)
    assert amp == pytest.approx(3.0, rel=0.02)
    assert 0.0 < v < 0.05    # small residual; dominated by amp^2 error


# ---------------------------------------------------------------------------
# Grouping
# ---------------------------------------------------------------------------

def test_group_rows_buckets_and_order():
    gam = np.array([1.0, 100.0, 10.0, 0.1])
    g = group_rows(GroupedSic(division_db=(15.0, 5.0)), gam)
    assert [list(x) for x in g] == [[1], [2], [0, 3]]
    g_full = group_rows(FullSic(), gam)
    assert [list(x) for x in g_full] == [[1], [2], [0], [3]]
    g_none = group_rows(NoSic(), gam)
    assert list(g_none[0]) == [1, 2, 0, 3]


def test_grouped_sic_validates_divisions():
    with pytest.raises(ValueError):
        GroupedSic(division_db=(3.0, 7.0))


# ---------------------------------------------------------------------------
# Full receiver
# ---------------------------------------------------------------------------

def _setup(k_a, n_p=64, pilot_bits=8, n_d=128, M=16, power=100.0, seed=0,
           msg_bits=48):
    cfg = SystemConfig(n_p=n_p, n_d=n_d, pilot_bits=pilot_bits,
                       msg_bits=msg_bits, M=M, K_a=k_a)
    cb = build_pilots("dft", n_p=n_p, n_bits=pilot_bits, seed=0)
    codec = PolarCodec(n_code=2 * n_d, payload_bits=msg_bits - pilot_bits,
                       list_size=32, design_snr_db=0.0)
    rng = np.random.default_rng(seed)
    pop = draw_population(cfg, FullInversion(power), None, rng)
    sym = np.stack([codec.encode(pop.messages[k, pilot_bits:])
                    for k in range(k_a)])
    Y_p = synthesize_pilot_phase(pop, cb, 1.0, rng)
    Y_d = synthesize_data_phase(pop, sym, 1.0, rng)
    return cfg, cb, codec, pop, Y_p, Y_d


def test_single_user_decodes_cleanly():
    cfg, cb, codec, pop, Y_p, Y_d = _setup(1, seed=10)
    det = detect(Y_p, cb, MlDenoiser(lam=1 / 256), AmpConfig(), k_a=1)
    res = run_receiver(Y_p, Y_d, cb, codec, det, NoSic(), N0=1.0)
    n_md, n_fa, nl = score_messages(res.messages, pop)
    assert (n_md, n_fa) == (0, 0)
    assert nl == 1


def test_receiver_identity_and_strategies_agree_at_high_power():
    for seed, strat in ((11, NoSic()), (12, FullSic()),
                        (13, GroupedSic(division_db=(0.0,)))):
        cfg, cb, codec, pop, Y_p, Y_d = _setup(10, seed=seed)
        det = detect(Y_p, cb, MlDenoiser(lam=10 / 256), AmpConfig(), k_a=10)
        res = run_receiver(Y_p, Y_d, cb, codec, det, strat, N0=1.0)
        n_md, n_fa, nl = score_messages(res.messages, pop)
        assert nl == n_fa + cfg.K_a - n_md
        assert n_md <= 1          # collisions aside, high power decodes


def test_full_sic_cancellation_reduces_residual():
    cfg, cb, codec, pop, Y_p, Y_d = _setup(8, seed=14)
    det = detect(Y_p, cb, MlDenoiser(lam=8 / 256), AmpConfig(), k_a=8)
    res = run_receiver(Y_p, Y_d, cb, codec, det, FullSic(), N0=1.0)
    n_cancelled = sum(r.cancelled for r in res.records)
    assert n_cancelled >= 7
    # power 100 per user leaves only noise + estimation error
    assert res.residual_power < 0.05 * 8 * 100.0
    assert res.residual_power > 0.0


def test_cancellation_exact_with_perfect_estimates():
    """Hand-built detection with the true channels: subtracting the decoded
    codeword must zero the data residual."""
    cfg, cb, codec, pop, Y_p, Y_d = _setup(1, seed=15)
    sym = codec.encode(pop.messages[0, cfg.pilot_bits:])
    Y_d_clean = np.sqrt(pop.gamma[0]) * np.outer(sym, pop.channels[0])
    det = DetectionResult(indices=pop.pilot_idx.copy(),
                          gamma_hat=pop.gamma.copy(), tau2=np.zeros(0),
                          iterations=0, diverged=False)
    # bypass estimation noise: noiseless pilots give H_hat ~= channels
    Y_p_clean = np.sqrt(pop.gamma[0]) * np.outer(cb.column(pop.pilot_idx[0]),
                                                 pop.channels[0])
    res = run_receiver(Y_p_clean, Y_d_clean, cb, codec, det, FullSic(),
                       N0=1e-9)
    assert res.residual_power < 1e-6 * pop.gamma[0]
    n_md, n_fa, _ = score_messages(res.messages, pop)
    assert (n_md, n_fa) == (0, 0)


def test_nosic_leaves_residual_at_signal_level():
    cfg, cb, codec, pop, Y_p, Y_d = _setup(8, seed=16)
    det = detect(Y_p, cb, MlDenoiser(lam=8 / 256), AmpConfig(), k_a=8)
    res = run_receiver(Y_p, Y_d, cb, codec, det, NoSic(), N0=1.0)
    assert sum(r.cancelled for r in res.records) == 0
    assert res.residual_power > 100.0    # all signal power still present


def test_pilot_collision_second_user_recovered():
    """Two users forced onto one pilot: cancellation plus the combined
    observation recovers both messages."""
    hits = 0
    for t in range(10):
        cfg, cb, codec, pop, Y_p, Y_d = _setup(2, seed=1000 + t)
        pop.pilot_idx[1] = pop.pilot_idx[0]
        pop.messages[1, :cfg.pilot_bits] = pop.messages[0, :cfg.pilot_bits]
        rng = np.random.default_rng(2000 + t)
        sym = np.stack([codec.encode(pop.messages[k, cfg.pilot_bits:])
                        for k in range(2)])
        Y_p = synthesize_pilot_phase(pop, cb, 1.0, rng)
        Y_d = synthesize_data_phase(pop, sym, 1.0, rng)
        det = detect(Y_p, cb, MlDenoiser(lam=2 / 256), AmpConfig(), k_a=2)
        res = run_receiver(Y_p, Y_d, cb, codec, det, FullSic(), N0=1.0)
        n_md, _, _ = score_messages(res.messages, pop)
        if n_md == 0:
            hits += 1
    assert hits >= 8


def test_diagnostics_csv_shape():
    cfg, cb, codec, pop, Y_p, Y_d = _setup(4, seed=17)
    det = detect(Y_p, cb, MlDenoiser(lam=4 / 256), AmpConfig(), k_a=4)
    res = run_receiver(Y_p, Y_d, cb, codec, det, FullSic(), N0=1.0)
    lines = res.diagnostics_csv().strip().split("\n")
    assert lines[0].startswith("stage,")
    assert lines[-1].startswith("residual,")
    assert len([x for x in lines if x.startswith("decode,")]) >= 1
