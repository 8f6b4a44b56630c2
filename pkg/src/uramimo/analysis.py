"""Closed-form post-MRC SINR predictions and error-probability models.

All SINR expressions share one convention. For user k with received power
gamma_k = P_k g_k and channel-estimation error variance sigma2_k, the
useful (coherent) power is M (1 - sigma2_k) gamma_k and the denominator
collects noise N0, the user's own estimation residual sigma2_k gamma_k,
full power gamma_j from every other uncancelled user, and the residual
I_j = (1 - eps_j) sigma2_j gamma_j + eps_j gamma_j from every user an
interference-cancellation stage already tried to remove (eps_j = 1 when
that user's decode failed). Setting the cancelled set empty gives the
no-SIC formula; cancelling every stronger user gives full SIC; cancelling
every strictly stronger group gives grouped SIC. The three variants then
satisfy SINR_full >= SINR_grouped >= SINR_none pointwise whenever they
share the same eps draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special


LOG2E = np.log2(np.e)


def qfunc(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def qfuncinv(p):
    return np.sqrt(2.0) * special.erfcinv(2.0 * np.asarray(p, dtype=float))


def sigma2_orthogonal(gamma, n_p: int, N0: float):
    """LMMSE error variance for orthogonal pilots of energy n_p."""
    gamma = np.asarray(gamma, dtype=float)
    return N0 / (N0 + n_p * gamma)


def error_cov_diag(A: np.ndarray, gamma, N0: float) -> np.ndarray:
    """Exact LMMSE error variances sigma2_k for pilot subset A (n_p x K).

    sigma2_k = 1 - gamma_k a_k^H (A Gamma A^H + N0 I)^-1 a_k, the diagonal
    of the channel-estimation error covariance per antenna.
    """
    gamma = np.asarray(gamma, dtype=float)
    n_p = A.shape[0]
    G = (A * gamma) @ A.conj().T + N0 * np.eye(n_p)
    W = linalg.cho_solve(linalg.cho_factor(G), A)
    quad = np.real(np.sum(A.conj() * W, axis=0))
    return np.clip(1.0 - gamma * quad, 0.0, 1.0)


# ---------------------------------------------------------------------------
# SINR formulas
# ---------------------------------------------------------------------------

def _residual(gamma, sigma2, eps):
    return (1.0 - eps) * sigma2 * gamma + eps * gamma


def sinr_no_sic(gamma, sigma2, N0: float, M: int):
    """Per-user post-MRC SINR without interference cancellation."""
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    total = gamma.sum()
    den = N0 + sigma2 * gamma + (total - gamma)
    return M * (1.0 - sigma2) * gamma / den


def sinr_full_sic(gamma, sigma2, N0: float, M: int, eps):
    """Per-user SINR under full SIC in descending received-power order.

    gamma must be sorted descending; eps[k] = 1 marks user k as decoded
    incorrectly (left uncancelled at full power). Entries are returned in
    the same order.
    """
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    eps = np.asarray(eps, dtype=float)
    resid = _residual(gamma, sigma2, eps)
    cum_resid = np.concatenate(([0.0], np.cumsum(resid)[:-1]))
    tail = gamma.sum() - np.cumsum(gamma)
    den = N0 + cum_resid + sigma2 * gamma + tail
    return M * (1.0 - sigma2) * gamma / den


def sinr_grouped_sic(gamma, sigma2, N0: float, M: int, group, eps):
    """Per-user SINR when cancellation runs group by group.

    group[k] is a nonnegative label, 0 = decoded first (largest received
    powers). Users in strictly earlier groups than k contribute their
    residual; everyone else (except k) contributes full power.
    """
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    group = np.asarray(group, dtype=int)
    eps = np.asarray(eps, dtype=float)
    resid = _residual(gamma, sigma2, eps)
    n_groups = group.max() + 1 if group.size else 0
    resid_per_group = np.bincount(group, weights=resid, minlength=n_groups)
    gamma_per_group = np.bincount(group, weights=gamma, minlength=n_groups)
    resid_before = np.concatenate(([0.0], np.cumsum(resid_per_group)[:-1]))
    full_after = gamma_per_group.sum() - np.cumsum(gamma_per_group)
    den = (N0 + resid_before[group] + sigma2 * gamma
           + (gamma_per_group[group] - gamma) + full_after[group])
    return M * (1.0 - sigma2) * gamma / den


def sinr_levels(levels, counts, zeta, n_p: int, N0: float, M: int,
                sigma2=None):
    """Group-level SINR recursion on received-power levels.

    levels: descending received powers pi_q; counts: users per level n_q;
    zeta[q]: expected number of failed decodes in level q (its residual
    stays at full power). sigma2 defaults to the orthogonal-pilot value
    per level. Returns one SINR per level, the value every user of that
    level sees under the mean-field substitution.
    """
    pi = np.asarray(levels, dtype=float)
    n = np.asarray(counts, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if sigma2 is None:
        sigma2 = sigma2_orthogonal(pi, n_p, N0)
    sigma2 = np.asarray(sigma2, dtype=float)
    resid = (n - zeta) * sigma2 * pi + zeta * pi
    resid_before = np.concatenate(([0.0], np.cumsum(resid)[:-1]))
    power = n * pi
    full_after = power.sum() - np.cumsum(power)
    den = N0 + resid_before + sigma2 * pi + (n - 1.0) * pi + full_after
    return M * (1.0 - sigma2) * pi / den


def draw_sic_outcomes(gamma, sigma2, N0: float, M: int, error_model,
                      rng: np.random.Generator, group=None):
    """Sequentially draw decode outcomes eps ~ Bernoulli(p_e(SINR)).

    Runs the cancellation order (per user when group is None, else per
    group), drawing each user's failure indicator from the error model at
    the SINR implied by the outcomes already drawn. Returns (sinr, eps).
    """
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    K = gamma.size
    eps = np.zeros(K)
    if group is None:
        order_group = np.arange(K)
    else:
        order_group = np.asarray(group, dtype=int)
    sinr = np.zeros(K)
    resid_before = 0.0
    total = gamma.sum()
    done_power = 0.0
    for q in range(order_group.max() + 1):
        sel = order_group == q
        gq, sq = gamma[sel], sigma2[sel]
        # current and later groups interfere at full power (minus self)
        den = (N0 + resid_before + sq * gq + (gq.sum() - gq)
               + (total - done_power - gq.sum()))
        s = M * (1.0 - sq) * gq / den
        pe = np.clip(error_model.pe(s), 0.0, 1.0)
        e = (rng.random(gq.size) < pe).astype(float)
        sinr[sel] = s
        eps[sel] = e
        resid_before += np.sum((1.0 - e) * sq * gq + e * gq)
        done_power += gq.sum()
    return sinr, eps


# ---------------------------------------------------------------------------
# Finite-blocklength normal approximation and error models
# ---------------------------------------------------------------------------

def na_dispersion(sinr):
    """Channel dispersion V in bits^2 for the real AWGN channel."""
    s = np.asarray(sinr, dtype=float)
    return (s / 2.0) * (s + 2.0) / (s + 1.0) ** 2 * LOG2E**2


def na_rate(sinr, n_real: int, pe):
    """Largest rate (bits per real channel use) at blocklength n_real and
    error probability pe."""
    s = np.asarray(sinr, dtype=float)
    return 0.5 * np.log2(1.0 + s) - np.sqrt(na_dispersion(s) / n_real) * qfuncinv(pe)


def na_pe(sinr, n_real: int, rate: float):
    """Error probability of the normal approximation at the given rate."""
    s = np.asarray(sinr, dtype=float)
    arg = (0.5 * np.log2(1.0 + s) - rate) * np.sqrt(n_real / na_dispersion(s))
    return qfunc(arg)


def required_sinr(rate: float, n_real: int, pe_target: float,
                  lo: float = 1e-9, hi: float = 1e9) -> float:
    """Invert the normal approximation: smallest SINR reaching pe_target.

    Bisection on a monotone map; rate in bits per real channel use.
    """
    if not 0.0 < pe_target < 1.0:
        raise ValueError("pe_target must lie in (0, 1)")
    f = lambda s: na_pe(s, n_real, rate) - pe_target
    if f(hi) > 0:
        raise ValueError("rate unreachable even at the upper SINR bracket")
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


@dataclass(frozen=True)
class NormalApprox:
    """p_e(SINR) from the normal approximation at fixed blocklength/rate."""

    n_real: int
    rate: float

    def pe(self, sinr):
        return na_pe(sinr, self.n_real, self.rate)

    def required_snr_db(self, pe_target: float) -> float:
        return 10.0 * np.log10(required_sinr(self.rate, self.n_real, pe_target))


class EmpiricalCurve:
    """Measured p_e over SNR(dB), log-linear interpolation in p_e.

    Queries outside the measured span clamp to the end values and set
    ``extrapolated``. Zero-error points are floored at 1/(10*trials) when
    a trial count is given, else at 1e-12, to keep the log interpolation
    defined.
    """

    def __init__(self, snr_db, pe, trials: int | None = None):
        snr_db = np.asarray(snr_db, dtype=float)
        pe = np.asarray(pe, dtype=float)
        if snr_db.size < 2:
            raise ValueError("need at least two measured points")
        order = np.argsort(snr_db)
        self.snr_db = snr_db[order]
        floor = 1.0 / (10.0 * trials) if trials else 1e-12
        self.pe_points = np.maximum(pe[order], floor)
        self.extrapolated = False

    def pe(self, sinr):
        x = 10.0 * np.log10(np.maximum(np.asarray(sinr, dtype=float), 1e-300))
        if np.any(x < self.snr_db[0]) or np.any(x > self.snr_db[-1]):
            self.extrapolated = True
        logpe = np.interp(x, self.snr_db, np.log10(self.pe_points))
        return 10.0 ** logpe

    def required_snr_db(self, pe_target: float) -> float:
        """Smallest measured-curve SNR reaching pe_target (log interp)."""
        logpe = np.log10(self.pe_points)
        if pe_target < 10.0 ** logpe.min():
            self.extrapolated = True
            return float(self.snr_db[-1])
        # walk from the high-SNR end to keep the answer conservative when
        # the measured curve is not perfectly monotone
        best = self.snr_db[-1]
        for i in range(len(self.snr_db) - 1, 0, -1):
            lo, hi = logpe[i], logpe[i - 1]
            target = np.log10(pe_target)
            if hi >= target >= lo:
                t = 0.0 if hi == lo else (target - lo) / (hi - lo)
                best = self.snr_db[i] + t * (self.snr_db[i - 1] - self.snr_db[i])
            elif lo > target:
                break
        return float(best)


def fading_average_pe(curve, sinr: float, M: int, sigma2: float = 0.0,
                      interferers: int = 0, interference_share: float = 0.0,
                      n_draws: int = 40_000, seed: int = 12345) -> float:
    """Block-error rate averaged over post-MRC SINR fluctuations.

    The deterministic-equivalent SINR holds only as M grows; at finite M
    the realized SINR moves with the combiner gain, the decoded user's
    own channel-estimation error and the drawn interference power:

        numerator   |r + z|^2 / (M (1 - sigma2)),
                    r^2 ~ (1 - sigma2) Gamma(M, 1),  z ~ CN(0, sigma2)
        denominator (1 - a) + a W,  W ~ Gamma(K', 1/K'),

    where a is the interference share of the mean denominator and K' the
    interferer count. Sampling uses a fixed seed so predictions are
    repeatable; with sigma2 = 0 and no interferers this reduces to the
    pure combiner-gain Gamma(M, 1/M) average.
    """
    rng = np.random.default_rng(seed)
    r2 = (1.0 - sigma2) * rng.gamma(M, 1.0, n_draws)
    z = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(n_draws)
                                 + 1j * rng.standard_normal(n_draws))
    num = np.abs(np.sqrt(r2) + z) ** 2 / (M * (1.0 - sigma2))
    den = 1.0
    if interferers > 0 and interference_share > 0.0:
        w = rng.gamma(interferers, 1.0 / interferers, n_draws)
        den = (1.0 - interference_share) + interference_share * w
    return float(np.mean(curve.pe(sinr * num / den)))


# ---------------------------------------------------------------------------
# Outage handling
# ---------------------------------------------------------------------------

def outage_quantile(samples: np.ndarray, delta: float) -> np.ndarray:
    """Per-column delta-quantile: the floor(N_s * delta)'th smallest sample
    (1-based), clamped to the smallest one for tiny delta."""
    samples = np.asarray(samples, dtype=float)
    n_s = samples.shape[0]
    if n_s * delta < 10.0:
        raise ValueError(
            f"need at least 10/delta = {10.0 / delta:.0f} samples for a "
            f"stable {delta} quantile, got {n_s}")
    idx = max(0, int(np.floor(n_s * delta)) - 1)
    return np.sort(samples, axis=0)[idx]


def pmd_outage_bound(sinr_quantiles, error_model, delta: float) -> float:
    """Misdetection bound averaging (1-delta) p_e(quantile SINR) + delta."""
    pe = np.clip(error_model.pe(np.asarray(sinr_quantiles)), 0.0, 1.0)
    return float(np.mean((1.0 - delta) * pe + delta))
