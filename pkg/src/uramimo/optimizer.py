"""Received-power level design for grouped interference cancellation.

Given a target post-combining SINR, find a small set of received-power
levels and occupancy fractions so every level meets the target while the
population transmit power stays low. Two solvers:

* solve_equal_groups: G equal-mass groups whose levels come from a damped
  fixed point driving every group SINR onto the target exactly.
* solve_level_grid: occupancy fractions over a dB grid of candidate
  levels via linear programming, iterating on the active support.

Both rely on the orthogonal-pilot error variance sigma2 = N0/(N0+n_p pi),
which makes every group SINR a function of the level profile alone.
Transmit cost uses Monte Carlo bin statistics of the LSFC law with the
strongest channels assigned to the loudest level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import analysis
from .channel import LsfcModel, PartialInversion


SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class OptimizerScenario:
    """System constants the level design depends on."""

    K_a: int
    M: int
    n_p: int
    target_sinr: float
    target_pe: float = 0.05
    N0: float = 1.0


@dataclass
class BinStats:
    corners_db: np.ndarray          # descending LSFC corners, len G-1
    xi: np.ndarray                  # occupancy fractions, len G
    inv_gain: np.ndarray            # E[1/g * 1{bin q}], strongest bin first


def lsfc_bin_stats(lsfc: LsfcModel, xi, n_draws: int = 10**6,
                   seed: int = 0) -> BinStats:
    """Quantile corners and per-bin mean inverse gains for fractions xi.

    Bin 0 holds the strongest fraction xi[0] of the LSFC law, so pairing
    bin q with level q receives the strongest users the loudest.
    """
    xi = np.asarray(xi, dtype=float)
    rng = np.random.default_rng(seed)
    _, g = lsfc.sample(n_draws, rng)
    cum = np.cumsum(xi)[:-1]
    corners = np.quantile(g, 1.0 - cum)          # descending with cum
    corners_db = 10.0 * np.log10(corners)
    labels = np.searchsorted(-corners, -g, side="left")
    inv = np.zeros(xi.size)
    np.add.at(inv, labels, 1.0 / g)
    return BinStats(corners_db=corners_db, xi=xi, inv_gain=inv / n_draws)


@dataclass
class PowerPlan:
    """A level profile with its occupancies and bookkeeping."""

    levels: np.ndarray              # descending received powers
    xi: np.ndarray
    target_sinr: float
    sinr: np.ndarray                # achieved per-level SINR
    corners_db: np.ndarray | None = None
    transmit_power: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return int(self.levels.size)

    @property
    def received_power(self) -> float:
        return float(np.sum(self.xi * self.levels))

    def to_policy(self) -> PartialInversion:
        if self.corners_db is None:
            raise ValueError("plan has no LSFC corners; pass lsfc when solving")
        return PartialInversion(corners_db=tuple(self.corners_db),
                                levels=tuple(self.levels),
                                xi=tuple(self.xi))

    def to_json(self) -> str:
        payload = {
            "levels": self.levels.tolist(),
            "xi": self.xi.tolist(),
            "target_sinr": self.target_sinr,
            "sinr": self.sinr.tolist(),
            "corners_db": None if self.corners_db is None
            else np.asarray(self.corners_db).tolist(),
            "transmit_power": self.transmit_power,
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PowerPlan":
        d = json.loads(text)
        return cls(levels=np.asarray(d["levels"], dtype=float),
                   xi=np.asarray(d["xi"], dtype=float),
                   target_sinr=float(d["target_sinr"]),
                   sinr=np.asarray(d["sinr"], dtype=float),
                   corners_db=None if d["corners_db"] is None
                   else np.asarray(d["corners_db"], dtype=float),
                   transmit_power=d["transmit_power"],
                   meta=d.get("meta", {}))


def plan_sinr(levels, xi, sc: OptimizerScenario) -> np.ndarray:
    counts = sc.K_a * np.asarray(xi, dtype=float)
    zeta = sc.target_pe * counts
    return analysis.sinr_levels(levels, counts, zeta, sc.n_p, sc.N0, sc.M)


def _finalize(levels, xi, sc: OptimizerScenario, lsfc, meta) -> PowerPlan:
    levels = np.asarray(levels, dtype=float)
    xi = np.asarray(xi, dtype=float)
    plan = PowerPlan(levels=levels, xi=xi, target_sinr=sc.target_sinr,
                     sinr=plan_sinr(levels, xi, sc), meta=meta)
    if lsfc is not None:
        stats = lsfc_bin_stats(lsfc, xi)
        plan.corners_db = stats.corners_db
        plan.transmit_power = float(sc.K_a * np.sum(levels * stats.inv_gain))
    return plan


# ---------------------------------------------------------------------------
# Equal-mass fixed point
# ---------------------------------------------------------------------------

def _solve_own_level(levels, q, counts, zeta, sc: OptimizerScenario,
                     hi: float = 1e3):
    """Smallest pi_q putting group q on target with the others held fixed."""

    def gap(x):
        trial = levels.copy()
        trial[q] = x
        return plan_sinr_raw(trial, counts, zeta, sc)[q] - sc.target_sinr

    lo = 1e-12
    if gap(hi) < 0.0:
        return None
    return optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-12)


def plan_sinr_raw(levels, counts, zeta, sc: OptimizerScenario) -> np.ndarray:
    return analysis.sinr_levels(levels, counts, zeta, sc.n_p, sc.N0, sc.M)


def solve_equal_groups(sc: OptimizerScenario, n_groups: int,
                       lsfc: LsfcModel | None = None, damping: float = 0.5,
                       tol: float = 1e-8, max_iters: int = 500,
                       n_starts: int = 5, seed: int = 0) -> PowerPlan | None:
    """Equal occupancies, levels from a damped per-group fixed point.

    Sweeps the groups weakest first, each time re-solving that group's
    level for the exact target given the rest, with damped updates.
    Returns the lowest-received-power converged profile over the starts,
    or None when every start fails.
    """
    xi = np.full(n_groups, 1.0 / n_groups)
    counts = sc.K_a * xi
    zeta = sc.target_pe * counts
    rng = np.random.default_rng(seed)
    best = None
    for start in range(n_starts):
        if start == 0:
            levels = np.full(n_groups, 10.0 ** -2.0)
        else:
            levels = np.sort(10.0 ** rng.uniform(-3.0, -1.0, n_groups))[::-1]
        ok = True
        for _ in range(max_iters):
            max_rel = 0.0
            for q in range(n_groups - 1, -1, -1):
                x = _solve_own_level(levels, q, counts, zeta, sc)
                if x is None:
                    ok = False
                    break
                new = levels[q] + damping * (x - levels[q])
                max_rel = max(max_rel, abs(new - levels[q]) / max(new, 1e-300))
                levels[q] = new
            if not ok or max_rel < tol:
                break
        if not ok or max_rel >= tol:
            continue
        if np.any(np.diff(levels) >= 0):
            continue
        cand = float(np.sum(xi * levels))
        if best is None or cand < best[0]:
            best = (cand, levels.copy())
    if best is None:
        return None
    meta = {"solver": "equal_groups", "n_groups": n_groups}
    return _finalize(best[1], xi, sc, lsfc, meta)


def sci_baseline(sc: OptimizerScenario,
                 lsfc: LsfcModel | None = None) -> PowerPlan | None:
    """Single received level (statistical channel inversion)."""
    return solve_equal_groups(sc, 1, lsfc=lsfc)


# ---------------------------------------------------------------------------
# Grid LP
# ---------------------------------------------------------------------------

def _grid_constraints(pi, sc: OptimizerScenario):
    """Per-level inequality rows over descending grid levels pi.

    Row q bounds the interference seen at level q: users at stronger
    levels count with their post-cancellation residual, users at q and
    below at full power, the decoder's own excess credited back on the
    right-hand side. Rows with a negative bound can never be met.
    """
    sigma2 = analysis.sigma2_orthogonal(pi, sc.n_p, sc.N0)
    resid = ((1.0 - sc.target_pe) * sigma2 + sc.target_pe) * pi
    m = pi.size
    A = np.empty((m, m))
    for q in range(m):
        A[q, :q] = sc.K_a * resid[:q]
        A[q, q:] = sc.K_a * pi[q:]
    b = (sc.M * (1.0 - sigma2) * pi / sc.target_sinr - sc.N0
         + (1.0 - sigma2) * pi)
    return A, b


def _solve_support(pi, A, b, support):
    """LP restricted to the given support; returns xi or None."""
    sub = np.flatnonzero(support)
    if sub.size == 0:
        return None
    res = optimize.linprog(c=pi[sub], A_ub=A[np.ix_(sub, sub)], b_ub=b[sub],
                           A_eq=np.ones((1, sub.size)), b_eq=[1.0],
                           bounds=(0.0, None), method="highs")
    if not res.success:
        return None
    xi = np.zeros(pi.size)
    xi[sub] = res.x
    return xi


def solve_level_grid(sc: OptimizerScenario, lsfc: LsfcModel | None = None,
                     grid_db=(-30.0, 0.0), spacing_db: float = 1.0,
                     n_offsets: int = 5, n_starts: int = 5,
                     seed: int = 0) -> PowerPlan | None:
    """Sparse level profile from an LP over a dB grid of candidates.

    Interference constraints only bind on levels that carry users, so the
    LP alternates: solve on a trial support, shrink the support to the
    levels actually used, re-solve. Several initial supports and grid
    offsets guard against a poor vertex; the lowest received power wins.
    """
    rng = np.random.default_rng(seed)
    best = None
    lo, hi = grid_db
    for k in range(n_offsets):
        off = spacing_db * k / n_offsets
        grid = np.arange(lo + off, hi + 1e-9, spacing_db)
        pi = 10.0 ** (grid[::-1] / 10.0)          # descending
        A, b = _grid_constraints(pi, sc)
        feasible = b > 0.0
        if not np.any(feasible):
            continue
        starts = [feasible.copy()]
        half = feasible.copy()
        half[pi < np.median(pi[feasible])] = False
        starts.append(half)
        every2 = feasible.copy()
        every2[1::2] = False
        starts.append(every2)
        while len(starts) < n_starts:
            rnd = feasible & (rng.random(pi.size) < 0.5)
            starts.append(rnd if np.any(rnd) else feasible.copy())
        for support in starts:
            for _ in range(30):
                xi = _solve_support(pi, A, b, support)
                if xi is None:
                    break
                used = xi > SUPPORT_TOL
                if used.sum() == 0 or np.array_equal(used, support):
                    break
                support = used
            if xi is None:
                continue
            used = xi > SUPPORT_TOL
            cand = float(np.sum(xi * pi))
            if best is None or cand < best[0]:
                best = (cand, pi[used].copy(), xi[used].copy(),
                        {"solver": "level_grid", "spacing_db": spacing_db,
                         "offset_db": off, "grid_db": list(grid_db)})
    if best is None:
        return None
    _, levels, xi, meta = best
    order = np.argsort(-levels, kind="stable")
    return _finalize(levels[order], xi[order] / xi.sum(), sc, lsfc, meta)


def power_gain_db(reference: PowerPlan, plan: PowerPlan) -> float:
    """Transmit-power advantage of plan over reference, in dB."""
    if reference.transmit_power is None or plan.transmit_power is None:
        raise ValueError("both plans need transmit_power (solve with lsfc)")
    return 10.0 * np.log10(reference.transmit_power / plan.transmit_power)
