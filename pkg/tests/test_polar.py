"""Polar+CRC codec: transform algebra, modulation, list decoding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uramimo.polar import (PolarCodec, crc_bits, demodulate, measure_pe_curve,
                           modulate, polar_transform)


def _codec(n_code=256, payload=40, list_size=8, design=-2.0):
    return PolarCodec(n_code=n_code, payload_bits=payload,
                      list_size=list_size, design_snr_db=design)


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def test_crc_detects_single_bit_flips():
    rng = np.random.default_rng(0)
    msg = rng.integers(0, 2, 120, dtype=np.uint8)
    ref = crc_bits(msg)
    for pos in rng.choice(120, size=40, replace=False):
        bad = msg.copy()
        bad[pos] ^= 1
        assert not np.array_equal(crc_bits(bad), ref)


def test_crc_is_linear():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 2, 64, dtype=np.uint8)
    b = rng.integers(0, 2, 64, dtype=np.uint8)
    assert np.array_equal(crc_bits(a ^ b), crc_bits(a) ^ crc_bits(b))


def test_polar_transform_involution():
    """F is its own inverse over GF(2)."""
    rng = np.random.default_rng(2)
    u = rng.integers(0, 2, 128, dtype=np.uint8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_modulate_gray_corners():
    sym = modulate(np.array([0, 0, 0, 1, 1, 0, 1, 1]))
    s2 = 1.0 / np.sqrt(2.0)
    assert np.allclose(sym, [s2 + 1j * s2, s2 - 1j * s2,
                             -s2 + 1j * s2, -s2 - 1j * s2])
    assert np.allclose(np.abs(sym), 1.0)


def test_demodulate_scaling_and_clip():
    sym = np.array([0.5 + 0.25j])
    llr = demodulate(sym, 0.5)
    assert llr[0] == pytest.approx(2.0 * np.sqrt(2.0) * 0.5 / 0.5)
    assert llr[1] == pytest.approx(2.0 * np.sqrt(2.0) * 0.25 / 0.5)
    big = demodulate(np.array([1e9 + 1e9j]), 1e-6)
    assert np.all(np.abs(big) <= 40.0)


def test_llr_gaussian_law():
    """At symbol SNR 3 dB the per-bit LLR mean is 2/v within 2%."""
    rng = np.random.default_rng(3)
    n = 200_000
    v = 10.0 ** (-3.0 / 10.0)
    bits = np.zeros(2 * n, dtype=np.uint8)
    y = modulate(bits) + np.sqrt(v / 2.0) * (rng.standard_normal(n)
                                             + 1j * rng.standard_normal(n))
    llr = demodulate(y, v)
    assert np.mean(llr) == pytest.approx(2.0 / v, rel=0.02)


# ---------------------------------------------------------------------------
# Codec
# ---------------------------------------------------------------------------

def test_zero_payload_constant_symbols():
    codec = _codec()
    s = codec.encode(np.zeros(40, dtype=np.uint8))
    assert np.allclose(s, (1.0 + 1.0j) / np.sqrt(2.0))


def test_encode_is_linear():
    codec = _codec()
    rng = np.random.default_rng(4)
    a = rng.integers(0, 2, 40, dtype=np.uint8)
    b = rng.integers(0, 2, 40, dtype=np.uint8)
    assert np.array_equal(codec.encode_bits(a ^ b),
                          codec.encode_bits(a) ^ codec.encode_bits(b))


def test_round_trip_noiseless():
    codec = _codec()
    rng = np.random.default_rng(5)
    for _ in range(200):
        payload = rng.integers(0, 2, 40, dtype=np.uint8)
        llr = demodulate(codec.encode(payload), 0.05)
        out = codec.decode_llrs(llr)
        assert out and np.array_equal(out[0][0], payload)


def test_round_trip_moderate_noise():
    codec = _codec(design=-2.0)
    rng = np.random.default_rng(6)
    v = 10.0 ** (-0.5 / 10.0)    # ~0.5 dB symbol SNR
    ok = 0
    for _ in range(100):
        payload = rng.integers(0, 2, 40, dtype=np.uint8)
        y = codec.encode(payload) + np.sqrt(v / 2.0) * (
            rng.standard_normal(128) + 1j * rng.standard_normal(128))
        out = codec.decode_llrs(demodulate(y, v))
        if out and np.array_equal(out[0][0], payload):
            ok += 1
    assert ok >= 90


def test_wrong_messages_never_pass_crc_silently():
    """Decoding noise must either return nothing or only survivors that
    really carry a consistent CRC; chance rate is about list * 2^-16."""
    codec = _codec(list_size=8)
    rng = np.random.default_rng(7)
    false_hits = sum(
        bool(codec.decode_llrs(3.0 * rng.standard_normal(256)))
        for _ in range(2000))
    assert false_hits <= 3


def test_survivors_sorted_by_path_metric():
    codec = _codec(list_size=16)
    rng = np.random.default_rng(8)
    payload = rng.integers(0, 2, 40, dtype=np.uint8)
    y = codec.encode(payload) + 0.6 * (rng.standard_normal(128)
                                       + 1j * rng.standard_normal(128))
    out = codec.decode_llrs(demodulate(y, 0.72))
    pms = [pm for _, pm in out]
    assert pms == sorted(pms)


def test_waterfall_monotone():
    codec = _codec()
    errs, curve = measure_pe_curve(codec, [-4.0, -1.0, 2.0], trials=200,
                                   seed=9)
    n = 200
    p = errs / n
    se = np.sqrt(np.maximum(p * (1 - p), 1.0 / n) / n)
    assert p[0] > p[2]
    assert p[0] + 2 * se[0] >= p[1] - 2 * se[1]
    assert p[1] + 2 * se[1] >= p[2] - 2 * se[2]
    assert curve.pe(10.0 ** (-4.0 / 10.0)) >= curve.pe(10.0 ** (2.0 / 10.0))


def test_codec_validates_sizes():
    with pytest.raises(ValueError):
        PolarCodec(n_code=100, payload_bits=10, list_size=4,
                   design_snr_db=0.0)
    with pytest.raises(ValueError):
        PolarCodec(n_code=64, payload_bits=64, list_size=4,
                   design_snr_db=0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**40 - 1))
def test_round_trip_hypothesis(x):
    codec = _codec(list_size=4)
    payload = np.array([(x >> i) & 1 for i in range(40)], dtype=np.uint8)
    out = codec.decode_llrs(demodulate(codec.encode(payload), 0.1))
    assert out and np.array_equal(out[0][0], payload)
