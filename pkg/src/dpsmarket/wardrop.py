"""Users' subscription (Wardrop) equilibrium for a given price pair.

Each subscriber base keeps joining until its members are indifferent
between subscribing and staying out (zero net utility), or stays empty if
even the first subscriber would lose.  For the DPS queue this gives four
regimes, labelled "I" (both bases active), "II" (only base 1), "III"
(only base 2) and "IV" (nobody).

Internally prices are mapped to *slacks* ``u = (p1/c)**(1/alpha1)`` and
``v = (p2/c)**(1/alpha2)``: the spare capacity ``mu - lambda`` at which a
lone base would be indifferent.  Region boundaries and subscriber counts
are rational functions of the slacks, which keeps the arithmetic cheap and
lets the vectorised and scalar paths share one set of formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateSplit, NoConvergence
from .market import MarketParams, PricePair, utility
from .queueing import STAB_EPS, Load, QueueConfig, delay_dps

Case = Literal["I", "II", "III", "IV"]
CASES: tuple[Case, ...] = ("I", "II", "III", "IV")

BOUNDARY_RTOL = 1e-12
# |gamma - 1/2| and |u - v|/u below these make the interior formulas 0/0
_HALF_TOL = 1e-12
_SPLIT_RTOL = 1e-9


@dataclass(frozen=True)
class WardropOutcome:
    case: Case
    n1_star: float
    n2_star: float
    residuals: tuple[float, float] = (math.nan, math.nan)
    degenerate: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> float:
        return self.n1_star + self.n2_star


@dataclass(frozen=True)
class RegionBoundaries:
    p1_hat: float
    p2_hat: float
    p1_cap: float
    p2_cap: float


# ---------------------------------------------------------------------------
# slack-space formulas


def _slack(p, c, alpha, mu):
    # floor keeps lambda <= mu (1 - STAB_EPS) when the price tends to zero
    return max((p / c) ** (1.0 / alpha), mu * STAB_EPS)


def _slack_array(p, c, alpha, mu):
    return np.maximum((np.asarray(p, dtype=float) / c) ** (1.0 / alpha), mu * STAB_EPS)


def _h2(u, mu, gamma):
    """Slack threshold for base 2 given base 1's slack (n2 -> 0 boundary)."""
    g1 = 1.0 - gamma
    return u * (g1 * u + gamma * mu) / (g1 * mu + gamma * u)


def _h1(v, mu, gamma):
    """Slack threshold for base 1 given base 2's slack (n1 -> 0 boundary)."""
    g1 = 1.0 - gamma
    return v * (gamma * v + g1 * mu) / (gamma * mu + g1 * v)


def _h2_inverse(v, mu, gamma):
    """Slack ``u`` with ``_h2(u) == v`` (positive root of a quadratic)."""
    g1 = 1.0 - gamma
    b = gamma * (mu - v)
    disc = b * b + 4.0 * g1 * g1 * v * mu
    # rationalised root: finite as g1 -> 0
    return 2.0 * g1 * v * mu / (b + math.sqrt(disc)) if b + math.sqrt(disc) > 0 else math.inf


def _h1_inverse(u, mu, gamma):
    return _h2_inverse(u, mu, 1.0 - gamma)


def _classify(u, v, mu, gamma):
    tol = 1.0 + BOUNDARY_RTOL
    in1 = u <= _h1(v, mu, gamma) * tol
    in2 = v <= _h2(u, mu, gamma) * tol
    if in1 and in2:
        return "I"
    if u <= mu * tol and not in2:
        return "II"
    if v <= mu * tol and not in1:
        return "III"
    return "IV"


def _interior(u, v, mu, gamma):
    """Case-I arrival rates ``(lam1, lam2)`` and a degenerate flag."""
    if abs(gamma - 0.5) <= _HALF_TOL and abs(u - v) <= _SPLIT_RTOL * max(u, v):
        lam = mu - 0.5 * (u + v)
        return 0.5 * lam, 0.5 * lam, True
    g1 = 1.0 - gamma
    d1 = gamma * u - g1 * v
    d2 = gamma * v - g1 * u
    if d1 == 0.0 or d2 == 0.0:
        raise DegenerateSplit(
            f"interior formulas are 0/0 at gamma={gamma}, slacks=({u}, {v})"
        )
    uv = u * v / d1
    lam1 = max(uv - mu * u / d2, 0.0)
    lam2 = max(mu * v / d2 - uv, 0.0)
    # cancellation near p = 0 can push the total past the stability guard
    limit = mu * (1.0 - STAB_EPS)
    if lam1 + lam2 > limit:
        scale = limit / (lam1 + lam2)
        lam1, lam2 = lam1 * scale, lam2 * scale
    return lam1, lam2, False


def regime_rates(case, u, v, mu, gamma):
    """Arrival rates ``(lam1, lam2)`` of a known regime at slacks ``(u, v)``."""
    if case == "I":
        lam1, lam2, _ = _interior(u, v, mu, gamma)
        return lam1, lam2
    if case == "II":
        return mu - u, 0.0
    if case == "III":
        return 0.0, mu - v
    return 0.0, 0.0


def _rates(u, v, mu, gamma):
    case = _classify(u, v, mu, gamma)
    if case == "I":
        lam1, lam2, degenerate = _interior(u, v, mu, gamma)
        return case, lam1, lam2, degenerate
    lam1, lam2 = regime_rates(case, u, v, mu, gamma)
    return case, lam1, lam2, False


def equilibrium_counts(queue: QueueConfig, market: MarketParams, p1: float, p2: float):
    """Fast scalar path: ``(case, n1, n2, degenerate)`` without residuals."""
    mu = queue.mu
    u = _slack(p1, market.c, market.alpha1, mu)
    v = _slack(p2, market.c, market.alpha2, mu)
    case, lam1, lam2, degenerate = _rates(u, v, mu, queue.gamma)
    return case, lam1 / queue.lambda_d, lam2 / queue.lambda_d, degenerate


def equilibrium_grid(queue: QueueConfig, market: MarketParams, p1, p2):
    """Vectorised equilibrium over broadcast price arrays.

    Returns ``(case_code, n1, n2)`` with ``case_code`` in 1..4 for I..IV.
    """
    mu, gamma, g1 = queue.mu, queue.gamma, 1.0 - queue.gamma
    u = _slack_array(p1, market.c, market.alpha1, mu)
    v = _slack_array(p2, market.c, market.alpha2, mu)
    u, v = np.broadcast_arrays(u, v)
    tol = 1.0 + BOUNDARY_RTOL
    in1 = u <= _h1(v, mu, gamma) * tol
    in2 = v <= _h2(u, mu, gamma) * tol
    code = np.full(u.shape, 4, dtype=np.int8)
    code[(v <= mu * tol) & ~in1] = 3
    code[(u <= mu * tol) & ~in2] = 2
    code[in1 & in2] = 1

    lam1 = np.where(code == 2, mu - u, 0.0)
    lam2 = np.where(code == 3, mu - v, 0.0)
    interior = code == 1
    if interior.any():
        ui, vi = u[interior], v[interior]
        d1 = gamma * ui - g1 * vi
        d2 = gamma * vi - g1 * ui
        split = (abs(gamma - 0.5) <= _HALF_TOL) & (np.abs(ui - vi) <= _SPLIT_RTOL * np.maximum(ui, vi))
        if np.any(((d1 == 0) | (d2 == 0)) & ~split):
            raise DegenerateSplit(f"interior formulas are 0/0 at gamma={gamma}")
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = ui * vi / d1
            l1 = uv - mu * ui / d2
            l2 = mu * vi / d2 - uv
        half = 0.5 * (mu - 0.5 * (ui + vi))
        l1 = np.where(split, half, np.maximum(l1, 0.0))
        l2 = np.where(split, half, np.maximum(l2, 0.0))
        limit = mu * (1.0 - STAB_EPS)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(l1 + l2 > limit, limit / (l1 + l2), 1.0)
        lam1[interior] = l1 * scale
        lam2[interior] = l2 * scale
    return code, lam1 / queue.lambda_d, lam2 / queue.lambda_d


# ---------------------------------------------------------------------------
# public operations


def wardrop_baseline(queue: QueueConfig, market: MarketParams, p1: float) -> float:
    """Subscribers of a lone base facing price ``p1`` on a PS queue."""
    if p1 > market.cap(queue.mu, 1):
        return 0.0
    u = _slack(p1, market.c, market.alpha1, queue.mu)
    return (queue.mu - u) / queue.lambda_d


def region_boundaries(queue: QueueConfig, market: MarketParams, prices: PricePair) -> RegionBoundaries:
    """Boundary prices ``p1_hat(p2)``, ``p2_hat(p1)`` and the two price caps."""
    mu, gamma, c = queue.mu, queue.gamma, market.c
    u = _slack(prices.p1, c, market.alpha1, mu)
    v = _slack(prices.p2, c, market.alpha2, mu)
    return RegionBoundaries(
        p1_hat=c * _h1(v, mu, gamma) ** market.alpha1,
        p2_hat=c * _h2(u, mu, gamma) ** market.alpha2,
        p1_cap=market.cap(mu, 1),
        p2_cap=market.cap(mu, 2),
    )


def residual_utilities(queue: QueueConfig, market: MarketParams, p1, p2, n1, n2):
    """Net utilities of a (possibly marginal) subscriber of each base."""
    t1, t2 = delay_dps(queue, Load(n1, n2))
    return (
        utility(t1, market.alpha1, p1, market.c),
        utility(t2, market.alpha2, p2, market.c),
    )


def wardrop_duopoly(queue: QueueConfig, market: MarketParams, prices: PricePair) -> WardropOutcome:
    """Closed-form subscription equilibrium for both bases."""
    case, n1, n2, degenerate = equilibrium_counts(queue, market, prices.p1, prices.p2)
    assert queue.lambda_d * (n1 + n2) < queue.mu, "equilibrium load must be stable"
    res = residual_utilities(queue, market, prices.p1, prices.p2, n1, n2)
    return WardropOutcome(case, n1, n2, res, degenerate)


def region_map(
    queue: QueueConfig,
    market: MarketParams,
    p1_grid: Sequence[float],
    p2_grid: Sequence[float],
) -> list[dict]:
    """Classify every ``(p1, p2)`` cell; rows follow ``p1`` outer, ``p2`` inner."""
    p1_grid = np.asarray(p1_grid, dtype=float)
    p2_grid = np.asarray(p2_grid, dtype=float)
    for name, g in (("p1_grid", p1_grid), ("p2_grid", p2_grid)):
        if g.ndim != 1 or (g.size > 1 and np.any(np.diff(g) <= 0)):
            raise ValueError(f"{name} must be a strictly increasing 1-D sequence")
    P1, P2 = np.meshgrid(p1_grid, p2_grid, indexing="ij")
    code, n1, n2 = equilibrium_grid(queue, market, P1, P2)
    rows = []
    for i, p1 in enumerate(p1_grid):
        for j, p2 in enumerate(p2_grid):
            rows.append(
                {
                    "p1": float(p1),
                    "p2": float(p2),
                    "case": CASES[code[i, j] - 1],
                    "n1": float(n1[i, j]),
                    "n2": float(n2[i, j]),
                }
            )
    return rows


# ---------------------------------------------------------------------------
# independent oracle: root finding on the utilities, no closed forms


def wardrop_oracle(
    queue: QueueConfig,
    market: MarketParams,
    prices: PricePair,
    utol: float = 1e-10,
    scan: int = 24,
) -> WardropOutcome:
    """Solve the Wardrop complementarity problem numerically.

    Uses only :func:`delay_dps` and :func:`utility`: nested Brent root finding
    for the interior point, one-dimensional roots for the single-base cases.
    Candidates are tried with more active bases first.
    """
    p1, p2 = prices.p1, prices.p2
    nmax = queue.mu * (1.0 - STAB_EPS) / queue.lambda_d
    trace: list[tuple] = []

    def U(n1, n2):
        return residual_utilities(queue, market, p1, p2, n1, n2)

    def solve_n1(n2):
        hi = nmax - n2
        if hi <= 0 or U(0.0, n2)[0] <= 0:
            return 0.0
        if U(hi, n2)[0] >= 0:
            return hi
        return brentq(lambda x: U(x, n2)[0], 0.0, hi, xtol=1e-13 * nmax, rtol=1e-15, maxiter=200)

    def solve_n2(n1):
        hi = nmax - n1
        if hi <= 0 or U(n1, 0.0)[1] <= 0:
            return 0.0
        if U(n1, hi)[1] >= 0:
            return hi
        return brentq(lambda x: U(n1, x)[1], 0.0, hi, xtol=1e-13 * nmax, rtol=1e-15, maxiter=200)

    def outer(n2):
        n1 = solve_n1(n2)
        return U(n1, n2)[1], n1

    # interior candidate: U1 = U2 = 0 with both bases active
    # uniform points plus geometric runs towards both ends, where roots
    # crowd when one base is small or the queue is near saturation
    ends = np.logspace(-1, -8, 15)
    grid = np.unique(np.concatenate([np.linspace(0.0, nmax, scan + 1), nmax * ends, nmax * (1.0 - ends)]))
    values = [outer(x) for x in grid]
    trace.extend((float(x), val[0], val[1]) for x, val in zip(grid, values))
    for k in range(len(grid) - 1):
        (ga, na), (gb, nb) = values[k], values[k + 1]
        if na <= 0 and nb <= 0:
            continue
        if ga == 0 or ga * gb < 0:
            lo, hi = grid[k], grid[k + 1]
            if ga == 0:
                n2 = lo
            else:
                n2 = brentq(lambda x: outer(x)[0], lo, hi, xtol=1e-13 * nmax, rtol=1e-15, maxiter=200)
            n1 = solve_n1(n2)
            res = U(n1, n2)
            if n1 > 0 and n2 > 0 and abs(res[0]) <= utol and abs(res[1]) <= utol:
                return WardropOutcome("I", n1, n2, res)
    # single-base candidates
    n1 = solve_n1(0.0)
    if n1 > 0:
        res = U(n1, 0.0)
        if res[1] <= utol:
            return WardropOutcome("II", n1, 0.0, res)
    n2 = solve_n2(0.0)
    if n2 > 0:
        res = U(0.0, n2)
        if res[0] <= utol:
            return WardropOutcome("III", 0.0, n2, res)
    res = U(0.0, 0.0)
    if res[0] <= utol and res[1] <= utol:
        return WardropOutcome("IV", 0.0, 0.0, res)
    raise NoConvergence(f"no Wardrop candidate verified at prices ({p1}, {p2})", trace)
