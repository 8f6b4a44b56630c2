"""Population sampling, power policies and signal synthesis."""

import numpy as np
import pytest

from uramimo.channel import (FullInversion, ImperfectInversion, LsfcModel,
                             NoPowerControl, PartialInversion, SystemConfig,
                             UserPopulation, draw_population,
                             synthesize_data_phase, synthesize_pilot_phase)
from uramimo.pilots import build_pilots


def test_pathloss_at_fixed_distances():
    # degenerate annulus pins the distance, shadowing off
    rng = np.random.default_rng(0)
    m1 = LsfcModel(shadow_std_db=0.0, r_min_km=1.0, r_max_km=1.0)
    _, g = m1.sample(100, rng)
    assert np.allclose(10.0 * np.log10(g), -128.1, atol=1e-9)
    m2 = LsfcModel(shadow_std_db=0.0, r_min_km=0.1, r_max_km=0.1)
    _, g = m2.sample(100, rng)
    assert np.allclose(10.0 * np.log10(g), -91.4, atol=1e-9)


def test_pathloss_identity_with_shadowing_off():
    rng = np.random.default_rng(1)
    m = LsfcModel(shadow_std_db=0.0)
    d, g = m.sample(2000, rng)
    assert np.allclose(10.0 * np.log10(g), -128.1 - 36.7 * np.log10(d),
                       atol=1e-9)
    assert d.min() >= 0.25 and d.max() <= 1.0


def test_gmax_cap():
    rng = np.random.default_rng(2)
    m = LsfcModel(g_max_db=-106.0)       # inside the pathloss range
    _, g = m.sample(5000, rng)
    cap = 10.0 ** (-10.6)
    assert g.max() <= cap * (1 + 1e-12)
    assert np.sum(g == cap) > 100        # many draws actually hit the cap


def test_distance_density_proportional_to_d():
    # uniform over the annulus area: P(d <= t) = (t^2-r^2)/(R^2-r^2)
    rng = np.random.default_rng(3)
    m = LsfcModel(r_min_km=0.25, r_max_km=1.0)
    d, _ = m.sample(200_000, rng)
    t = 0.6
    expect = (t**2 - 0.25**2) / (1.0**2 - 0.25**2)
    got = np.mean(d <= t)
    assert abs(got - expect) < 3.0 * np.sqrt(expect * (1 - expect) / d.size)


def test_full_inversion_received_power():
    rng = np.random.default_rng(4)
    g = 10.0 ** rng.uniform(-12.0, -3.0, size=64)
    p, grp = FullInversion(rho=0.01).assign(g, rng)
    assert np.allclose(p * g, 0.01, rtol=1e-12)
    assert np.all(grp == 0)
    p1, _ = FullInversion(rho=1.0).assign(np.array([0.01]), rng)
    assert p1[0] == pytest.approx(100.0)


def test_inversion_rejects_zero_g():
    rng = np.random.default_rng(0)
    bad = np.array([1e-3, 0.0])
    for policy in (FullInversion(1.0), ImperfectInversion(1.0, 3.0),
                   PartialInversion(corners_db=(-16.0,), levels=(2.0, 1.0),
                                    xi=(0.5, 0.5))):
        with pytest.raises(ValueError, match="non-invertible"):
            policy.assign(bad, rng)


def test_imperfect_inversion_spread():
    rng = np.random.default_rng(5)
    g = np.full(20000, 0.1)
    p, _ = ImperfectInversion(rho=1.0, err_db=3.0).assign(g, rng)
    rec_db = 10.0 * np.log10(p * g)
    assert rec_db.min() >= -3.0 - 1e-9 and rec_db.max() <= 3.0 + 1e-9
    assert rec_db.min() < -2.5 and rec_db.max() > 2.5
    # uniform in dB: mean ~0, var ~ 3
    assert abs(rec_db.mean()) < 0.1
    assert abs(rec_db.var() - 3.0) < 0.2


def test_partial_inversion_membership():
    pol = PartialInversion(corners_db=(-16.0,), levels=(2.0, 1.0),
                           xi=(0.5, 0.5))
    rng = np.random.default_rng(6)
    g = np.array([10.0 ** -2.0])             # -20 dB, below the corner
    p, grp = pol.assign(g, rng)
    assert grp[0] == 1
    assert p[0] == pytest.approx(1.0 * 10.0 ** 2.0)
    # the corner itself belongs to the upper group
    g_edge = np.array([10.0 ** -1.6])
    _, grp_edge = pol.assign(g_edge, rng)
    assert grp_edge[0] == 0


def test_zero_users_noiseless_signal():
    cfg = SystemConfig(n_p=16, n_d=8, pilot_bits=4, msg_bits=10, M=4, K_a=0)
    cb = build_pilots("dft", n_p=16, n_bits=4, seed=0)
    rng = np.random.default_rng(7)
    pop = draw_population(cfg, NoPowerControl(1.0), None, rng)
    Y = synthesize_pilot_phase(pop, cb, 0.0, rng)
    assert np.all(Y == 0)
    Yn = synthesize_pilot_phase(pop, cb, 1.0, rng)
    assert abs(np.mean(np.abs(Yn) ** 2) - 1.0) < 0.2


def test_single_user_rank_one():
    cfg = SystemConfig(n_p=16, n_d=8, pilot_bits=4, msg_bits=10, M=6, K_a=1)
    cb = build_pilots("dft", n_p=16, n_bits=4, seed=0)
    rng = np.random.default_rng(8)
    pop = draw_population(cfg, NoPowerControl(2.0), None, rng)
    Y = synthesize_pilot_phase(pop, cb, 0.0, rng)
    s = np.linalg.svd(Y, compute_uv=False)
    assert s[1] < 1e-12 * s[0]
    a = cb.column(int(pop.pilot_idx[0]))
    proj = np.abs(a.conj() @ Y) / (np.linalg.norm(a) * np.linalg.norm(Y, axis=0))
    assert np.allclose(proj, 1.0, atol=1e-12)


def test_collision_aggregates_power():
    """Two users on one pilot: the projection variance per antenna is the
    sum of their received powers."""
    cfg = SystemConfig(n_p=16, n_d=8, pilot_bits=4, msg_bits=10, M=1, K_a=2)
    cb = build_pilots("dft", n_p=16, n_bits=4, seed=0)
    g = np.array([1.0, 1.0])
    p_tx = np.array([1.0, 2.0])              # received powers 1 and 2
    rng = np.random.default_rng(9)
    vals = np.empty(10_000, dtype=complex)
    for i in range(vals.size):
        h = (rng.standard_normal((2, 1)) + 1j * rng.standard_normal((2, 1)))
        h /= np.sqrt(2.0)
        pop = UserPopulation(messages=np.zeros((2, 10), dtype=np.uint8),
                             pilot_idx=np.array([3, 3]), d_km=np.zeros(2),
                             g=g, p_tx=p_tx, group=np.zeros(2, dtype=int),
                             channels=h)
        Y = synthesize_pilot_phase(pop, cb, 0.0, rng)
        vals[i] = cb.column(3).conj() @ Y[:, 0] / cfg.n_p
    var = np.mean(np.abs(vals) ** 2)
    se = np.std(np.abs(vals) ** 2) / np.sqrt(vals.size)
    assert abs(var - 3.0) < 3.0 * se


def test_data_phase_shape_and_power():
    cfg = SystemConfig(n_p=16, n_d=32, pilot_bits=4, msg_bits=10, M=4, K_a=3)
    rng = np.random.default_rng(10)
    pop = draw_population(cfg, FullInversion(1.0), None, rng)
    sym = np.exp(2j * np.pi * rng.random((3, 32))) / 1.0
    Y = synthesize_data_phase(pop, sym, 0.0, rng)
    assert Y.shape == (32, 4)
    # average power per entry = sum of gamma over users (unit symbols)
    assert abs(np.mean(np.abs(Y) ** 2) / 3.0 - 1.0) < 0.5


def test_same_seed_same_everything():
    cfg = SystemConfig(n_p=32, n_d=16, pilot_bits=5, msg_bits=12, M=4, K_a=6)
    cb = build_pilots("dft", n_p=32, n_bits=5, seed=0)
    lsfc = LsfcModel()
    outs = []
    for _ in range(2):
        rng = np.random.default_rng(1234)
        pop = draw_population(cfg, FullInversion(1.0), lsfc, rng)
        Y = synthesize_pilot_phase(pop, cb, 1.0, rng)
        outs.append((pop.messages.copy(), pop.g.copy(), Y.copy()))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])


def test_population_csv_round_trip():
    cfg = SystemConfig(n_p=16, n_d=8, pilot_bits=4, msg_bits=9, M=2, K_a=5)
    rng = np.random.default_rng(11)
    pop = draw_population(cfg, FullInversion(1.0), LsfcModel(), rng)
    text = pop.to_csv()
    assert text.splitlines()[0].startswith("user_id,d_km,g_dB,P_tx,group")
    back = UserPopulation.from_csv(text, msg_bits=9, channels=pop.channels)
    assert np.array_equal(back.pilot_idx, pop.pilot_idx)
    assert np.allclose(back.g, pop.g, rtol=1e-6)
    assert np.allclose(back.p_tx, pop.p_tx, rtol=1e-6)
