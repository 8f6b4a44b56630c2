"""Multiple-measurement-vector AMP for pilot activity detection.

The detector works on the column-normalized system: pilots have squared
norm n_p, so AMP iterates on Y_p / sqrt(n_p) and A / sqrt(n_p) (unit
columns). Row k of the iterate X then estimates x_k = sqrt(gamma_k) h_k
in physical units and the per-antenna noise levels tau2 settle near
N0 / n_p plus the undetected interference excess.

Iterations, starting from X = 0, Z = Y_p / sqrt(n_p):

    tau2[i] = ||Z[:, i]||^2 / divisor          (divisor n_p, or N)
    R       = A^H Z / sqrt(n_p) + X
    X'      = eta(R, tau2)                      row-wise denoiser
    Z'      = Y_p/sqrt(n_p) - A X'/sqrt(n_p) + (N/n_p) * Z * <eta'>

where <eta'> is the across-rows average of the diagonal (Wirtinger)
Jacobian of the denoiser. Both denoisers treat their gain estimate as a
plug-in constant when differentiating; the diagonal entries come out
real.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .pilots import PilotCodebook


# ---------------------------------------------------------------------------
# g_min regularization rules for the ML denoiser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GminAbsolute:
    """Fixed floor, e.g. the smallest received power the policy allows."""

    value: float

    def floor(self, tau2_mean: float) -> float:
        return self.value


@dataclass(frozen=True)
class GminTauMultiple:
    """Floor tracking the current noise level, multiple * mean(tau2)."""

    multiple: float = 2.0

    def floor(self, tau2_mean: float) -> float:
        return self.multiple * tau2_mean


# ---------------------------------------------------------------------------
# Row denoisers. Both return (X_hat, diag_jacobian, gamma_hat).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MlDenoiser:
    """Activity-posterior shrinkage with a per-row ML gain estimate.

    For row r with plug-in gain ghat, the estimate is
    phi * ghat/(ghat + tau2_i) * r_i where phi is the posterior activity
    probability under the two-component model (inactive vs active with
    gain ghat) at prior lam.
    """

    lam: float
    g_min: GminAbsolute | GminTauMultiple = GminTauMultiple(2.0)

    def gamma_ml(self, R: np.ndarray, tau2: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, np.mean(np.abs(R) ** 2, axis=1) - tau2.mean())

    def __call__(self, R: np.ndarray, tau2: np.ndarray):
        gamma = self.gamma_ml(R, tau2)
        g = np.maximum(gamma, self.g_min.floor(float(tau2.mean())))[:, None]
        x_hat, jac, _ = _pme_fixed_gain(R, g, tau2, self.lam)
        return x_hat, jac, gamma

    def denoise_fixed_gain(self, R: np.ndarray, g, tau2: np.ndarray):
        """(x_hat, diag_jacobian, activity posterior) at a supplied gain;
        this is the map the finite-difference oracle probes."""
        g = np.broadcast_to(np.asarray(g, dtype=float).reshape(-1, 1),
                            (R.shape[0], 1)).copy()
        return _pme_fixed_gain(R, g, tau2, self.lam)


def _pme_fixed_gain(R: np.ndarray, g: np.ndarray, tau2: np.ndarray,
                    lam: float):
    """Two-component posterior-mean estimate and its diagonal Jacobian.

    g is (N, 1); tau2 is (M,). The log likelihood ratio is accumulated in
    the log domain so rows far into either tail saturate cleanly.
    """
    t2 = tau2[None, :]
    absr2 = np.abs(R) ** 2
    c = g / (g + t2)
    # log [ (1-lam)/lam * prod_i (g+t2)/t2 * exp(-g|r_i|^2/(t2(g+t2))) ]
    quad = g * absr2 / (t2 * (g + t2))
    logit = (np.log((1.0 - lam) / lam)
             + np.sum(np.log1p(g / t2) - quad, axis=1, keepdims=True))
    phi = expit(-logit)
    x_hat = phi * c * R
    jac = phi * c * (1.0 + (1.0 - phi) * quad)
    return x_hat, jac, phi[:, 0]


@dataclass(frozen=True)
class DiscretePmeDenoiser:
    """Posterior-mean denoiser for a known discrete set of power levels.

    Components: inactive (prior 1-lam) and active at level pi_i (prior
    lam * xi_i), with proper M-dimensional circular-Gaussian likelihoods
    CN(0, (pi_i + tau2_m) delta_nm). gamma_hat is the posterior-mean
    level; a MAP level index is available for rounding.
    """

    lam: float
    levels: tuple
    xi: tuple

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.xi):
            raise ValueError("levels and xi must align")
        if abs(sum(self.xi) - 1.0) > 1e-9:
            raise ValueError("xi must sum to one")
        if np.any(np.asarray(self.levels) <= 0):
            raise ValueError("levels must be positive")

    def posteriors(self, R: np.ndarray, tau2: np.ndarray) -> np.ndarray:
        """(N, G+1) posterior over {inactive, level 1..G}; rows sum to 1."""
        t2 = tau2[None, None, :]
        pi = np.asarray(self.levels, dtype=float)[None, :, None]
        absr2 = np.abs(R) ** 2
        logw_act = (np.log(self.lam) + np.log(np.asarray(self.xi))[None, :]
                    - np.sum(np.log(np.pi * (pi + t2))
                             + absr2[:, None, :] / (pi + t2), axis=2))
        logw_in = (np.log(1.0 - self.lam)
                   - np.sum(np.log(np.pi * tau2)[None, :]
                            + absr2 / tau2[None, :], axis=1))
        logw = np.concatenate([logw_in[:, None], logw_act], axis=1)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        return w / w.sum(axis=1, keepdims=True)

    def __call__(self, R: np.ndarray, tau2: np.ndarray):
        q = self.posteriors(R, tau2)
        pi = np.asarray(self.levels, dtype=float)
        t2 = tau2[None, :]
        c = pi[:, None] / (pi[:, None] + t2)        # (G, M) shrinkage
        d_act = 1.0 / (pi[:, None] + t2)            # (G, M)
        d_in = (1.0 / tau2)[None, :]                # (1, M)
        ceff = q[:, 1:] @ c                         # (N, M)
        x_hat = ceff * R
        dbar = q[:, :1] * d_in + q[:, 1:] @ d_act
        qcd = q[:, 1:] @ (c * d_act)
        jac = ceff - np.abs(R) ** 2 * (qcd - ceff * dbar)
        gamma_hat = q[:, 1:] @ pi
        return x_hat, jac, gamma_hat

    def map_level(self, R: np.ndarray, tau2: np.ndarray) -> np.ndarray:
        """Index into levels of the active-component MAP, per row."""
        return np.argmax(self.posteriors(R, tau2)[:, 1:], axis=1)


# ---------------------------------------------------------------------------
# AMP loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmpConfig:
    max_iters: int = 20
    tol: float = 1e-6
    tau_divisor: str = "n_p"        # "n_p" or "N"
    guard_growth_iters: int = 3     # consecutive tau2 increases -> abort


@dataclass
class AmpResult:
    R: np.ndarray                   # decoupled observations A^H Z + X
    X: np.ndarray
    tau2: np.ndarray                # final per-antenna noise levels
    gamma_hat: np.ndarray           # per-column effective power estimates
    iterations: int
    diverged: bool
    tau2_trace: np.ndarray          # mean tau2 per iteration
    resid_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def trace_csv(self) -> str:
        """Per-iteration debugging trace: iteration, mean tau2, residual
        Frobenius norm (normalized units)."""
        lines = ["iteration,mean_tau2,resid_norm"]
        for i, (t2, rn) in enumerate(zip(self.tau2_trace, self.resid_trace)):
            lines.append(f"{i},{t2:.8g},{rn:.8g}")
        return "\n".join(lines) + "\n"


def run_amp(Y_p: np.ndarray, codebook: PilotCodebook, denoiser,
            config: AmpConfig = AmpConfig()) -> AmpResult:
    if config.max_iters < 1:
        raise ValueError("need at least one iteration")
    n_p, N = codebook.n_p, codebook.size
    scale = np.sqrt(n_p)
    Ys = Y_p / scale
    divisor = {"n_p": n_p, "N": N}[config.tau_divisor]

    M = Y_p.shape[1]
    X = np.zeros((N, M), dtype=complex)
    Z = Ys.copy()
    trace = []
    resid_trace = []
    grow = 0
    best = None                     # (mean tau2, state) with smallest tau2
    diverged = False
    iterations = 0

    for it in range(config.max_iters):
        tau2 = np.sum(np.abs(Z) ** 2, axis=0) / divisor
        trace.append(tau2.mean())
        resid_trace.append(np.linalg.norm(Z))
        if it > 0 and trace[-1] > trace[-2]:
            grow += 1
            if grow >= config.guard_growth_iters:
                diverged = True
                break
        else:
            grow = 0
        R = codebook.adjoint(Z) / scale + X
        X_new, jac, gamma_hat = denoiser(R, tau2)[:3]
        onsager = (N / n_p) * np.mean(jac, axis=0)
        Z = Ys - codebook.apply(X_new) / scale + Z * onsager[None, :]
        delta = np.linalg.norm(X_new - X) / max(np.linalg.norm(X_new), 1e-300)
        X = X_new
        iterations = it + 1
        if best is None or trace[-1] <= best[0]:
            best = (trace[-1], (R, X, tau2, np.asarray(gamma_hat)))
        if delta < config.tol:
            break

    R, X, tau2, gamma_hat = best[1]
    return AmpResult(R=R, X=X, tau2=tau2, gamma_hat=gamma_hat,
                     iterations=iterations, diverged=diverged,
                     tau2_trace=np.asarray(trace),
                     resid_trace=np.asarray(resid_trace))


# ---------------------------------------------------------------------------
# Active-set selection
# ---------------------------------------------------------------------------

def select_top_k(gamma_hat: np.ndarray, k_a: int, delta: int = 0) -> np.ndarray:
    """Indices of the K_a + delta largest effective-power estimates."""
    k = min(k_a + delta, gamma_hat.size)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    idx = np.argpartition(-gamma_hat, k - 1)[:k]
    return idx[np.argsort(-gamma_hat[idx], kind="stable")]


def energy_threshold(g_hat: np.ndarray, tau2_mean: float, M: int) -> np.ndarray:
    """Per-row decision threshold on ||r||^2 for the likelihood-ratio
    activity test at gain g_hat; tends to M*tau2 as g_hat -> 0."""
    g = np.asarray(g_hat, dtype=float)
    t2 = tau2_mean
    with np.errstate(divide="ignore", invalid="ignore"):
        thr = M * (t2 * (g + t2) / g) * np.log1p(g / t2)
    return np.where(g < 1e-300, M * t2, thr)


def select_threshold(R: np.ndarray, g_hat: np.ndarray, tau2: np.ndarray) -> np.ndarray:
    M = R.shape[1]
    energy = np.sum(np.abs(R) ** 2, axis=1)
    thr = energy_threshold(g_hat, float(tau2.mean()), M)
    idx = np.flatnonzero(energy > thr)
    return idx[np.argsort(-g_hat[idx], kind="stable")]


@dataclass
class DetectionResult:
    indices: np.ndarray             # detected columns, strongest first
    gamma_hat: np.ndarray           # effective-power estimate per index
    tau2: np.ndarray
    iterations: int
    diverged: bool
    map_level: np.ndarray | None = None


def detect(Y_p: np.ndarray, codebook: PilotCodebook, denoiser,
           config: AmpConfig = AmpConfig(), k_a: int | None = None,
           delta: int = 0) -> DetectionResult:
    """Run AMP and pick the active set.

    With k_a given, the K_a + delta strongest columns are returned
    (delta = floor(K_a/40) is the customary slack); otherwise the
    likelihood-ratio energy threshold decides.
    """
    res = run_amp(Y_p, codebook, denoiser, config)
    gamma = res.gamma_hat
    if isinstance(denoiser, MlDenoiser):
        g_reg = np.maximum(gamma, denoiser.g_min.floor(float(res.tau2.mean())))
    else:
        g_reg = np.maximum(gamma, 1e-300)
    if k_a is not None:
        idx = select_top_k(gamma, k_a, delta)
    else:
        idx = select_threshold(res.R, g_reg, res.tau2)
    map_level = None
    if isinstance(denoiser, DiscretePmeDenoiser) and idx.size:
        map_level = denoiser.map_level(res.R[idx], res.tau2)
    return DetectionResult(indices=idx, gamma_hat=gamma[idx], tau2=res.tau2,
                           iterations=res.iterations, diverged=res.diverged,
                           map_level=map_level)


def detection_errors(detected: np.ndarray, true_active: np.ndarray):
    """(misdetections, false alarms) between index sets."""
    det = set(int(i) for i in detected)
    tru = set(int(i) for i in true_active)
    return len(tru - det), len(det - tru)
