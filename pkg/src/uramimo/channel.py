"""Quasi-static Rayleigh uplink with large-scale fading and power control.

Conventions used throughout the package:

* K_a active users out of a large population share one codebook.
* User k draws a distance from the density f(d) proportional to d on
  [r_min, r_max] (uniform over the annulus area), a large-scale fading
  coefficient (LSFC) g_k from pathloss plus log-normal shadowing, and an
  i.i.d. CN(0, I_M) channel vector h_k.
* A power policy maps g_k to the transmit power P_k; the received power
  per symbol is gamma_k = P_k * g_k.
* Pilot phase: Y_p = sum_k sqrt(gamma_k) a_{i_k} h_k^T + Z_p, with the
  pilot index i_k given by the first J message bits.
  Data phase: Y_d = sum_k sqrt(gamma_k) s_k h_k^T + Z_d.
  Noise is CN(0, N0) per entry in both phases.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .pilots import PilotCodebook, bits_to_index


@dataclass(frozen=True)
class SystemConfig:
    """Frame geometry and population sizes.

    Attributes:
        n_p: pilot phase length (symbols).
        n_d: data phase length (symbols).
        pilot_bits: J, number of message bits selecting the pilot.
        msg_bits: B, total message length; payload is B - J bits.
        M: base-station antennas.
        K_a: active users per frame.
        N0: complex noise power per symbol.
    """

    n_p: int
    n_d: int
    pilot_bits: int
    msg_bits: int
    M: int
    K_a: int
    N0: float = 1.0

    def __post_init__(self) -> None:
        if self.n_p <= 0 or self.n_d <= 0:
            raise ValueError("n_p and n_d must be positive")
        if self.msg_bits <= self.pilot_bits:
            raise ValueError("msg_bits must exceed pilot_bits")
        if self.K_a < 0 or self.M <= 0:
            raise ValueError("K_a must be nonnegative and M positive")
        if self.N0 < 0:
            raise ValueError("N0 must be nonnegative")

    @property
    def n(self) -> int:
        return self.n_p + self.n_d

    @property
    def num_pilots(self) -> int:
        return 1 << self.pilot_bits

    @property
    def payload_bits(self) -> int:
        return self.msg_bits - self.pilot_bits


@dataclass(frozen=True)
class LsfcModel:
    """Pathloss plus log-normal shadowing over an annular cell.

    g[dB] = -alpha - beta*log10(d_km) + shadow_std_db * z, z ~ N(0,1),
    optionally capped at g_max_db. Distances in km with density
    proportional to d on [r_min_km, r_max_km].
    """

    alpha: float = 128.1
    beta: float = 36.7
    shadow_std_db: float = 4.0
    r_min_km: float = 0.25
    r_max_km: float = 1.0
    g_max_db: float | None = None

    def sample_distances(self, size: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(size)
        return np.sqrt(self.r_min_km**2 + u * (self.r_max_km**2 - self.r_min_km**2))

    def lsfc_db(self, d_km: np.ndarray, z: np.ndarray) -> np.ndarray:
        g_db = -self.alpha - self.beta * np.log10(d_km) + self.shadow_std_db * z
        if self.g_max_db is not None:
            g_db = np.minimum(g_db, self.g_max_db)
        return g_db

    def sample(self, size: int, rng: np.random.Generator):
        """Returns (d_km, g_linear)."""
        d = self.sample_distances(size, rng)
        g_db = self.lsfc_db(d, rng.standard_normal(size))
        return d, 10.0 ** (g_db / 10.0)


# ---------------------------------------------------------------------------
# Power policies. Each maps sampled LSFCs to transmit powers and a group
# label (0 = strongest group; policies without groups label everyone 0).
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoPowerControl:
    """Fixed transmit power regardless of the channel."""

    p_tx: float

    def assign(self, g: np.ndarray, rng: np.random.Generator):
        return np.full_like(g, self.p_tx), np.zeros(g.size, dtype=int)


def _require_invertible(g: np.ndarray) -> None:
    if np.any(np.asarray(g) <= 0.0):
        raise ValueError("non-invertible LSFC")


@dataclass(frozen=True)
class FullInversion:
    """Statistical channel inversion: every user is received at rho."""

    rho: float

    def assign(self, g: np.ndarray, rng: np.random.Generator):
        _require_invertible(g)
        return self.rho / g, np.zeros(g.size, dtype=int)


@dataclass(frozen=True)
class ImperfectInversion:
    """Channel inversion with a bounded dB error on the received power.

    The received power is rho * 10**(u/10) with u uniform on
    [-err_db, err_db], modelling imperfect knowledge of the own LSFC.
    """

    rho: float
    err_db: float

    def assign(self, g: np.ndarray, rng: np.random.Generator):
        _require_invertible(g)
        u = rng.uniform(-self.err_db, self.err_db, size=g.size)
        return self.rho * 10.0 ** (u / 10.0) / g, np.zeros(g.size, dtype=int)

    @property
    def levels(self) -> np.ndarray:
        return np.array([self.rho])


@dataclass(frozen=True)
class PartialInversion:
    """Quantized inversion onto G received-power levels.

    Users compare their own LSFC (in dB) against descending corner points
    o_1 > ... > o_{G-1}; group q collects o_{q-1} > g_dB >= o_q with
    o_0 = +inf and o_G = -inf. Group q transmits at P = levels[q] / g, so
    it is received exactly at levels[q]. Levels must be descending, so
    group 0 (largest LSFCs) is received the loudest and is decoded first.

    xi holds the expected occupancy fractions of the groups under the
    LSFC distribution the corners were derived from.
    """

    corners_db: tuple
    levels: tuple
    xi: tuple

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.corners_db) + 1:
            raise ValueError("need exactly len(corners_db) + 1 levels")
        if len(self.xi) != len(self.levels):
            raise ValueError("xi must have one entry per level")
        if np.any(np.diff(self.corners_db) >= 0):
            raise ValueError("corners_db must be strictly descending")
        if np.any(np.diff(self.levels) >= 0):
            raise ValueError("levels must be strictly descending")
        if abs(sum(self.xi) - 1.0) > 1e-9:
            raise ValueError("xi must sum to one")

    def group_of(self, g: np.ndarray) -> np.ndarray:
        g_db = 10.0 * np.log10(g)
        # corners descend, so compare negated values on an ascending axis;
        # side="left" keeps the boundary g_db == o_q inside group q
        return np.searchsorted(-np.asarray(self.corners_db), -g_db, side="left")

    def assign(self, g: np.ndarray, rng: np.random.Generator):
        _require_invertible(g)
        grp = self.group_of(g)
        return np.asarray(self.levels)[grp] / g, grp


PowerPolicy = NoPowerControl | FullInversion | ImperfectInversion | PartialInversion


def corners_from_quantiles(lsfc: LsfcModel, n_groups: int, n_draws: int = 10**6,
                           seed: int = 0) -> np.ndarray:
    """Descending interior corner points (dB) splitting the LSFC law into
    n_groups equal-probability groups."""
    rng = np.random.default_rng(seed)
    _, g = lsfc.sample(n_draws, rng)
    qs = 1.0 - np.arange(1, n_groups) / n_groups
    return 10.0 * np.log10(np.quantile(g, qs))


# ---------------------------------------------------------------------------
# Population draw and signal synthesis
# ---------------------------------------------------------------------------

@dataclass
class UserPopulation:
    """One frame's worth of active users with everything the ground truth
    scorer needs: messages, pilots, powers and channel vectors."""

    messages: np.ndarray        # (K_a, B) uint8
    pilot_idx: np.ndarray       # (K_a,) int
    d_km: np.ndarray            # (K_a,)
    g: np.ndarray               # (K_a,) linear LSFC
    p_tx: np.ndarray            # (K_a,) transmit power
    group: np.ndarray           # (K_a,) int
    channels: np.ndarray        # (K_a, M) complex

    @property
    def gamma(self) -> np.ndarray:
        """Received power per symbol, P_k * g_k."""
        return self.p_tx * self.g

    def gamma_per_pilot(self, num_pilots: int) -> np.ndarray:
        """Aggregate effective received power per pilot index (collisions
        add up)."""
        out = np.zeros(num_pilots)
        np.add.at(out, self.pilot_idx, self.gamma)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["user_id", "d_km", "g_dB", "P_tx", "group", "pilot_index",
                    "message_hex"])
        for k in range(self.messages.shape[0]):
            msg = "".join(str(int(b)) for b in self.messages[k])
            w.writerow([k, f"{self.d_km[k]:.6f}",
                        f"{10*np.log10(self.g[k]):.4f}",
                        f"{self.p_tx[k]:.6e}", int(self.group[k]),
                        int(self.pilot_idx[k]), hex(int(msg, 2))])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, msg_bits: int, channels: np.ndarray | None = None):
        rows = list(csv.DictReader(io.StringIO(text)))
        K = len(rows)
        msgs = np.zeros((K, msg_bits), dtype=np.uint8)
        d = np.zeros(K)
        g = np.zeros(K)
        p = np.zeros(K)
        grp = np.zeros(K, dtype=int)
        pidx = np.zeros(K, dtype=int)
        for k, r in enumerate(rows):
            val = int(r["message_hex"], 16)
            msgs[k] = [(val >> (msg_bits - 1 - t)) & 1 for t in range(msg_bits)]
            d[k] = float(r["d_km"])
            g[k] = 10.0 ** (float(r["g_dB"]) / 10.0)
            p[k] = float(r["P_tx"])
            grp[k] = int(r["group"])
            pidx[k] = int(r["pilot_index"])
        if channels is None:
            channels = np.zeros((K, 0), dtype=complex)
        return UserPopulation(msgs, pidx, d, g, p, grp, channels)


def draw_population(cfg: SystemConfig, policy: PowerPolicy,
                    lsfc: LsfcModel | None,
                    rng: np.random.Generator) -> UserPopulation:
    """Draw messages, LSFCs, powers and channels for one frame.

    With lsfc=None every user has g = 1 (useful with FullInversion to
    model perfect power control without a cell geometry).
    """
    K = cfg.K_a
    messages = rng.integers(0, 2, size=(K, cfg.msg_bits), dtype=np.uint8)
    pilot_idx = np.array([bits_to_index(m[:cfg.pilot_bits]) for m in messages],
                         dtype=np.int64)
    if lsfc is None:
        d = np.zeros(K)
        g = np.ones(K)
    else:
        d, g = lsfc.sample(K, rng)
    p_tx, group = policy.assign(g, rng)
    h = (rng.standard_normal((K, cfg.M))
         + 1j * rng.standard_normal((K, cfg.M))) / np.sqrt(2.0)
    return UserPopulation(messages, pilot_idx, d, g, p_tx, group, h)


def _noise(shape, N0: float, rng: np.random.Generator) -> np.ndarray:
    if N0 == 0:
        return np.zeros(shape, dtype=complex)
    return np.sqrt(N0 / 2.0) * (rng.standard_normal(shape)
                                + 1j * rng.standard_normal(shape))


def synthesize_pilot_phase(pop: UserPopulation, codebook: PilotCodebook,
                           N0: float, rng: np.random.Generator) -> np.ndarray:
    """Y_p (n_p x M): superimposed scaled pilots plus noise."""
    M = pop.channels.shape[1]
    X = np.zeros((codebook.size, M), dtype=complex)
    amps = np.sqrt(pop.gamma)
    np.add.at(X, pop.pilot_idx, amps[:, None] * pop.channels)
    return codebook.apply(X) + _noise((codebook.n_p, M), N0, rng)


def synthesize_data_phase(pop: UserPopulation, symbols: np.ndarray,
                          N0: float, rng: np.random.Generator) -> np.ndarray:
    """Y_d (n_d x M) from per-user unit-energy symbol rows (K_a x n_d)."""
    amps = np.sqrt(pop.gamma)
    Y = symbols.T @ (amps[:, None] * pop.channels)
    return Y + _noise(Y.shape, N0, rng)
