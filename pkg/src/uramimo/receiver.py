"""Channel estimation, maximum-ratio combining and interference
cancellation for the data phase.

The receiver treats the detected pilot columns as the user set. LMMSE
estimates the unit-variance channel rows H (so the estimated received
signal amplitude of row k is sqrt(gamma_hat_k) * H_hat[k]); MRC forms

    S = diag(gamma_hat)^(-1/2) H_hat Y_d^H

whose row k approximates M (1 - sigma2_k) conj(s_k): the rows carry the
conjugated symbols, and every consumer conjugates before demodulation.

Cancellation strategies share one round structure: rows are bucketed into
groups ordered by decreasing estimated received power, every row of a
group is decoded against the current residual, then all successful rows
are subtracted at their estimated amplitude before the next group runs.
NoSic is one group, FullSic one group per row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .amp import DetectionResult
from .pilots import PilotCodebook, index_to_bits
from .polar import PolarCodec, demodulate


GAMMA_FLOOR = 1e-15


@dataclass
class ChannelEstimate:
    H_hat: np.ndarray               # (K, M) unit-variance channel estimates
    sigma2: np.ndarray              # (K,) per-row error variances
    regularized: bool = False


def lmmse_estimate(Y_p: np.ndarray, A_sub: np.ndarray, gamma: np.ndarray,
                   N0: float) -> ChannelEstimate:
    """LMMSE channel estimates for the detected columns.

    A_sub is n_p x K with squared column norms n_p, gamma the estimated
    received powers. A singular system (possible at N0 = 0) is ridged by
    1e-10 * trace/n_p and flagged.
    """
    n_p = A_sub.shape[0]
    gamma = np.maximum(np.asarray(gamma, dtype=float), 0.0)
    G = (A_sub * gamma) @ A_sub.conj().T + N0 * np.eye(n_p)
    regularized = False
    try:
        cho = linalg.cho_factor(G)
    except linalg.LinAlgError:
        ridge = 1e-10 * np.real(np.trace(G)) / n_p + 1e-300
        cho = linalg.cho_factor(G + ridge * np.eye(n_p))
        regularized = True
    W = linalg.cho_solve(cho, A_sub)            # G^-1 A, n_p x K
    H_hat = np.sqrt(gamma)[:, None] * (W.conj().T @ Y_p)
    quad = np.real(np.sum(A_sub.conj() * W, axis=0))
    sigma2 = np.clip(1.0 - gamma * quad, 0.0, 1.0)
    return ChannelEstimate(H_hat=H_hat, sigma2=sigma2, regularized=regularized)


def mrc_soft_symbols(Y_d: np.ndarray, H_hat: np.ndarray,
                     gamma: np.ndarray) -> np.ndarray:
    """Rows of diag(gamma)^(-1/2) H_hat Y_d^H (conjugated soft symbols)."""
    gamma = np.maximum(np.asarray(gamma, dtype=float), GAMMA_FLOOR)
    return (H_hat @ Y_d.conj().T) / np.sqrt(gamma)[:, None]


def estimate_row_scale_noise(row: np.ndarray):
    """Median/moment estimate of (amplitude, noise var) for a QPSK row.

    Fallback when no analytic SINR is available: the per-dimension
    amplitude comes from medians of |Re| and |Im| (robust to the noise
    tail), the noise power from the second moment minus the signal power.
    """
    a_dim = 0.5 * (np.median(np.abs(row.real)) + np.median(np.abs(row.imag)))
    amp = np.sqrt(2.0) * a_dim
    m2 = np.mean(np.abs(row) ** 2)
    v = max(m2 - amp**2, 1e-6 * m2 + 1e-300)
    return amp, v


# ---------------------------------------------------------------------------
# Cancellation strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoSic:
    pass


@dataclass(frozen=True)
class FullSic:
    pass


@dataclass(frozen=True)
class GroupedSic:
    """Rows bucketed by estimated received power against descending
    interior division points (dB)."""

    division_db: tuple

    def __post_init__(self) -> None:
        if len(self.division_db) and np.any(np.diff(self.division_db) >= 0):
            raise ValueError("division points must be strictly descending")


def group_rows(strategy, gamma_hat: np.ndarray) -> list:
    """Row index buckets in decode order (strongest first)."""
    order = np.argsort(-gamma_hat, kind="stable")
    if isinstance(strategy, NoSic):
        return [order]
    if isinstance(strategy, FullSic):
        return [np.array([k]) for k in order]
    g_db = 10.0 * np.log10(np.maximum(gamma_hat, GAMMA_FLOOR))
    corners = -np.asarray(strategy.division_db, dtype=float)
    labels = np.searchsorted(corners, -g_db, side="right")
    return [np.flatnonzero(labels == q) for q in range(len(corners) + 1)]


# ---------------------------------------------------------------------------
# Full receiver round
# ---------------------------------------------------------------------------

@dataclass
class RowRecord:
    row: int
    pilot_index: int
    group: int
    gamma_hat: float
    sigma2: float
    sinr_pred: float
    n_survivors: int
    cancelled: bool


@dataclass
class ReceiverResult:
    messages: list                  # deduplicated B-bit arrays
    records: list                   # one RowRecord per detected row
    detection: DetectionResult
    estimate: ChannelEstimate
    residual_power: float           # ||Y_d residual||_F^2 / size after SIC

    def diagnostics_csv(self) -> str:
        """Per-group decode summary plus the final residual energy."""
        lines = ["stage,group,rows,decoded,crc_failures,cancelled,residual_power"]
        groups = sorted({r.group for r in self.records})
        for g in groups:
            rs = [r for r in self.records if r.group == g]
            dec = sum(1 for r in rs if r.n_survivors > 0)
            lines.append(f"decode,{g},{len(rs)},{dec},{len(rs) - dec},"
                         f"{sum(1 for r in rs if r.cancelled)},")
        lines.append(f"residual,,,,,,{self.residual_power:.8g}")
        return "\n".join(lines) + "\n"


def run_receiver(Y_p: np.ndarray, Y_d: np.ndarray, codebook: PilotCodebook,
                 codec: PolarCodec, detection: DetectionResult,
                 strategy=NoSic(), N0: float = 1.0,
                 noise_mode: str = "analytic",
                 pilot_bits: int | None = None) -> ReceiverResult:
    """Decode every detected row, cancelling group by group.

    Each CRC-passing list survivor becomes a candidate message (pilot
    prefix bits plus payload); rows may contribute several messages when
    users collide on a pilot. Only the best survivor of a row is
    subtracted from the residual.
    """
    pilot_bits = codebook.n_bits if pilot_bits is None else pilot_bits
    idx = detection.indices
    gam = np.maximum(detection.gamma_hat, GAMMA_FLOOR)
    M = Y_p.shape[1]
    A_sub = codebook.columns(idx)
    est = lmmse_estimate(Y_p, A_sub, gam, N0)
    sig2 = est.sigma2

    groups = group_rows(strategy, gam)
    Yd_res = Y_d.copy()
    cancelled = np.zeros(idx.size, dtype=bool)
    resid_cancelled = 0.0           # sum sigma2*gamma over cancelled rows
    messages = []
    seen = set()
    records = []

    for gi, rows in enumerate(groups):
        if rows.size == 0:
            continue
        S = mrc_soft_symbols(Yd_res, est.H_hat[rows], gam[rows])
        active_power = np.sum(gam[~cancelled])
        den = (N0 + resid_cancelled + sig2[rows] * gam[rows]
               + (active_power - gam[rows]))
        sinr = M * (1.0 - sig2[rows]) * gam[rows] / den
        decoded_payload = {}
        row_soft = {}
        for j, k in enumerate(rows):
            coh = max(M * (1.0 - sig2[k]), 1e-30)
            if noise_mode == "analytic":
                sym = np.conj(S[j]) / coh
                v = 1.0 / max(sinr[j], 1e-30)
            else:
                amp, vraw = estimate_row_scale_noise(np.conj(S[j]))
                sym = np.conj(S[j]) / max(amp, 1e-30)
                v = vraw / max(amp, 1e-30) ** 2
            survivors = codec.decode_llrs(demodulate(sym, v))
            for payload, _pm in survivors:
                msg = np.concatenate([index_to_bits(int(idx[k]), pilot_bits),
                                      payload])
                key = msg.tobytes()
                if key not in seen:
                    seen.add(key)
                    messages.append(msg)
            if survivors:
                decoded_payload[k] = survivors[0][0]
                row_soft[k] = S[j].copy()
            records.append(RowRecord(row=int(k), pilot_index=int(idx[k]),
                                     group=gi, gamma_hat=float(gam[k]),
                                     sigma2=float(sig2[k]),
                                     sinr_pred=float(sinr[j]),
                                     n_survivors=len(survivors),
                                     cancelled=False))
        if not isinstance(strategy, NoSic):
            for k, payload in decoded_payload.items():
                s_hat = codec.encode(payload)
                Yd_res -= np.sqrt(gam[k]) * np.outer(s_hat, est.H_hat[k])
                cancelled[k] = True
                resid_cancelled += sig2[k] * gam[k]
            for r in records:
                if r.row in decoded_payload:
                    r.cancelled = True

        # Colliding users share a pilot row.  Before cancellation the row's
        # soft symbols look like a*(c1+c2); subtracting the decoded codeword
        # leaves a*(c2-c1), so the average of the two observations is a clean
        # a*c2 on every position.  One extra decode of that combination
        # recovers the second message.  Gated on the row being unusually
        # strong (aggregate power of two users) and on the cancellation
        # leaving substantial energy behind.
        if not isinstance(strategy, NoSic) and decoded_payload:
            gmed = float(np.median(gam))
            for k in decoded_payload:
                if gam[k] <= 1.7 * gmed:
                    continue
                r2 = mrc_soft_symbols(Yd_res, est.H_hat[k:k + 1],
                                      gam[k:k + 1])[0]
                pre = row_soft[k]
                if np.mean(np.abs(r2) ** 2) <= 0.2 * np.mean(np.abs(pre) ** 2):
                    continue
                comb = 0.5 * (pre + r2)
                amp, vraw = estimate_row_scale_noise(np.conj(comb))
                sym = np.conj(comb) / max(amp, 1e-30)
                v = vraw / max(amp, 1e-30) ** 2
                survivors = codec.decode_llrs(demodulate(sym, v))
                fresh = None
                for payload, _pm in survivors:
                    msg = np.concatenate([index_to_bits(int(idx[k]),
                                                        pilot_bits), payload])
                    key = msg.tobytes()
                    if key not in seen:
                        seen.add(key)
                        messages.append(msg)
                        fresh = payload if fresh is None else fresh
                if fresh is not None:
                    Yd_res -= np.sqrt(gam[k]) * np.outer(codec.encode(fresh),
                                                         est.H_hat[k])
                    resid_cancelled += sig2[k] * gam[k]

    resid = float(np.mean(np.abs(Yd_res) ** 2))
    return ReceiverResult(messages=messages, records=records,
                          detection=detection, estimate=est,
                          residual_power=resid)
