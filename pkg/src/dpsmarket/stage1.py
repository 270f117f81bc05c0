"""Operators' pricing stage, solved by backward induction over the Wardrop
subscription equilibrium.

* baseline: the network operator (NO) alone, closed-form optimum plus a
  numeric cross-check;
* monopolistic: the NO prices both subscriber bases jointly;
* strategic: NO and virtual operator (VO) each price their own base and
  play a Nash game, the VO paying ``delta`` per subscriber.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import NoEquilibriumFound, OptimizerFailure
from .market import (
    MarketParams,
    PricePair,
    ProfitReport,
    Scenario,
    profit_baseline,
    profit_monopolistic,
    profit_strategic,
)
from .queueing import STAB_EPS, QueueConfig
from .search import argmax_smallest, golden_max, segment_max
from .wardrop import (
    WardropOutcome,
    _h1,
    _h1_inverse,
    _h2,
    _h2_inverse,
    _slack,
    regime_rates,
    equilibrium_counts,
    equilibrium_grid,
    wardrop_baseline,
    wardrop_duopoly,
)

log = logging.getLogger(__name__)

Operator = Literal["NO", "VO"]

PRICE_TOL = 1e-10
NASH_TOL = 1e-6
WALK_TOL = 1e-7
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class EquilibriumResult:
    scenario: Scenario
    p1: float
    p2: float | None
    outcome: WardropOutcome
    profits: ProfitReport
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def prices(self) -> PricePair:
        return PricePair(self.p1, self.p2 if self.p2 is not None else math.inf)

    @property
    def n_total(self) -> float:
        return self.outcome.total


def _caps(queue: QueueConfig, market: MarketParams) -> tuple[float, float]:
    return market.cap(queue.mu, 1), market.cap(queue.mu, 2)


# ---------------------------------------------------------------------------
# baseline


def baseline_closed_form(queue: QueueConfig, market: MarketParams) -> tuple[float, float]:
    """Optimal lone-operator price and profit."""
    a, c = market.alpha1, market.c
    base = a / (1.0 + a) * queue.mu
    return c * base ** a, c / (a * queue.lambda_d) * base ** (1.0 + a)


def solve_baseline(queue: QueueConfig, market: MarketParams) -> EquilibriumResult:
    p_star, pi_star = baseline_closed_form(queue, market)

    def profit(p):
        return profit_baseline(wardrop_baseline(queue, market, p), p)

    cap = market.cap(queue.mu, 1)
    p_num, pi_num = segment_max(profit, np.vectorize(profit), 0.0, cap, npts=101, tol=1e-12)
    n1 = wardrop_baseline(queue, market, p_star)
    outcome = WardropOutcome("II" if n1 > 0 else "IV", n1, 0.0)  # base 2 does not exist
    return EquilibriumResult(
        "baseline",
        p_star,
        None,
        outcome,
        ProfitReport("baseline", pi0=pi_star),
        {
            "p1_numeric": p_num,
            "pi0_numeric": pi_num,
            "dp": abs(p_num - p_star),
            "dpi_rel": abs(pi_num - pi_star) / pi_star,
        },
    )


# ---------------------------------------------------------------------------
# monopolistic


def _mono_profit_grid(queue, market, P1, P2):
    _, n1, n2 = equilibrium_grid(queue, market, P1, P2)
    return n1 * P1 + n2 * P2


def _mono_profit(queue, market, p1, p2):
    _, n1, n2, _ = equilibrium_counts(queue, market, p1, p2)
    return profit_monopolistic(n1, p1, n2, p2)


def _is_symmetric_ps(queue: QueueConfig, market: MarketParams) -> bool:
    return abs(queue.gamma - 0.5) <= 1e-12 and market.alpha1 == market.alpha2


def _zoom(queue, market, p1, p2, h1, h2, caps, levels=12, npts=21):
    """Successively finer grids centred on the incumbent best point."""
    best = _mono_profit(queue, market, p1, p2)
    for _ in range(levels):
        g1 = np.clip(p1 + h1 * np.linspace(-2, 2, npts), 0.0, caps[0])
        g2 = np.clip(p2 + h2 * np.linspace(-2, 2, npts), 0.0, caps[1])
        P1, P2 = np.meshgrid(g1, g2, indexing="ij")
        vals = _mono_profit_grid(queue, market, P1, P2)
        k = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[k] > best:
            best, p1, p2 = float(vals[k]), float(P1[k]), float(P2[k])
        h1, h2 = h1 / 5.0, h2 / 5.0
    return p1, p2, best


def _cyclic_golden(queue, market, p1, p2, h1, h2, caps, step_tol=1e-7, max_sweeps=100):
    best = _mono_profit(queue, market, p1, p2)
    for _ in range(max_sweeps):
        q1, _ = golden_max(lambda x: _mono_profit(queue, market, x, p2),
                           max(p1 - h1, 0.0), min(p1 + h1, caps[0]), tol=1e-12)
        q2, val = golden_max(lambda y: _mono_profit(queue, market, q1, y),
                             max(p2 - h2, 0.0), min(p2 + h2, caps[1]), tol=1e-12)
        if val < best:
            break
        moved = max(abs(q1 - p1), abs(q2 - p2))
        p1, p2, best = q1, q2, val
        if moved < step_tol:
            break
    return p1, p2, best


def solve_monopolistic(
    queue: QueueConfig,
    market: MarketParams,
    grid: int = 201,
    n_refine: int = 4,
) -> EquilibriumResult:
    """Joint profit-maximising prices for both bases.

    A coarse grid over the price box locates the best cells; each of the
    ``n_refine`` best is polished by zooming grids and cyclic golden-section
    coordinate search.  The objective is only piecewise smooth (it changes
    formula across Wardrop regions), hence the multi-start.
    """
    caps = _caps(queue, market)
    g1 = np.linspace(0.0, caps[0], grid)
    g2 = np.linspace(0.0, caps[1], grid)
    P1, P2 = np.meshgrid(g1, g2, indexing="ij")
    vals = _mono_profit_grid(queue, market, P1, P2)
    grid_best = float(vals.max())
    h1, h2 = g1[1] - g1[0], g2[1] - g2[0]

    # best distinct cells, ties to the smallest price sum
    order = np.lexsort(((P1 + P2).ravel(), -vals.ravel()))
    starts: list[tuple[float, float]] = []
    for idx in order:
        i, j = np.unravel_index(idx, vals.shape)
        if all(abs(i - a) > 2 or abs(j - b) > 2 for a, b in starts):
            starts.append((i, j))
        if len(starts) == n_refine:
            break

    trace = []
    candidates = []
    for i, j in starts:
        zp1, zp2, zval = _zoom(queue, market, g1[i], g2[j], h1, h2, caps)
        cp1, cp2, cval = _cyclic_golden(queue, market, zp1, zp2, h1, h2, caps)
        trace.append({"start": (float(g1[i]), float(g2[j])), "zoom": (zp1, zp2, zval), "golden": (cp1, cp2, cval)})
        candidates.append((zval, zp1, zp2))
        candidates.append((cval, cp1, cp2))
    top = max(c[0] for c in candidates)
    if top < grid_best - 1e-12 * max(1.0, abs(grid_best)):
        raise OptimizerFailure("refinement fell below the coarse grid optimum", trace)
    near = [c for c in candidates if c[0] >= top - TIE_RTOL * max(1.0, abs(top))]
    pi_m, p1, p2 = min(near, key=lambda c: (c[1] + c[2], c[1]))

    diagnostics = {"grid_best": grid_best, "refine_trace": trace, "degenerate": False}
    if _is_symmetric_ps(queue, market):
        # plain PS queue serving one homogeneous population: only the total is
        # priced, both bases get the lone-operator price
        p_sym, pi_sym = baseline_closed_form(queue, market)
        diagnostics.update(degenerate=True, numeric=(p1, p2, pi_m))
        p1 = p2 = p_sym
        pi_m = max(pi_sym, _mono_profit(queue, market, p1, p2))

    outcome = wardrop_duopoly(queue, market, PricePair(p1, p2))
    pi_m = profit_monopolistic(outcome.n1_star, p1, outcome.n2_star, p2)
    return EquilibriumResult(
        "monopolistic", p1, p2, outcome, ProfitReport("monopolistic", pi_m=pi_m), diagnostics
    )


# ---------------------------------------------------------------------------
# strategic


def _strategic_profits(queue, market, p1, p2):
    _, n1, n2, _ = equilibrium_counts(queue, market, p1, p2)
    return profit_strategic(n1, p1, n2, p2, market.delta)


def _profit_of(queue, market, operator: Operator):
    delta = market.delta

    if operator == "NO":
        def scalar(p1, p2):
            _, n1, n2, _ = equilibrium_counts(queue, market, p1, p2)
            return n1 * p1 + n2 * delta

        def vector(p1, p2):
            _, n1, n2 = equilibrium_grid(queue, market, p1, p2)
            return n1 * p1 + n2 * delta
    else:
        def scalar(p1, p2):
            _, _, n2, _ = equilibrium_counts(queue, market, p1, p2)
            return n2 * (p2 - delta)

        def vector(p1, p2):
            _, _, n2 = equilibrium_grid(queue, market, p1, p2)
            return n2 * (p2 - delta)
    return scalar, vector


def _own_breakpoints(queue, market, operator: Operator, other_price: float) -> list[float]:
    """Own prices where the Wardrop regime changes, other price held fixed."""
    mu, gamma, c = queue.mu, queue.gamma, market.c
    if operator == "NO":
        v = _slack(other_price, c, market.alpha2, mu)
        cap = market.cap(mu, 1)
        if v > mu:
            return [0.0, cap]
        inner = [_h2_inverse(v, mu, gamma), _h1(v, mu, gamma)]
        alpha = market.alpha1
    else:
        u = _slack(other_price, c, market.alpha1, mu)
        cap = market.cap(mu, 2)
        if u > mu:
            return [0.0, cap]
        inner = [_h1_inverse(u, mu, gamma), _h2(u, mu, gamma)]
        alpha = market.alpha2
    pts = [0.0, cap]
    pts += [min(c * s ** alpha, cap) for s in inner if math.isfinite(s)]
    if operator == "VO" and market.delta <= cap:
        pts.append(market.delta)
    return sorted(set(pts))


def _segment_objective(queue, market, operator: Operator, other_price: float, case: str):
    """Own profit as a function of own price inside one Wardrop regime."""
    mu, gamma, c, lam_d, delta = queue.mu, queue.gamma, market.c, queue.lambda_d, market.delta
    floor = mu * STAB_EPS
    if operator == "NO":
        inv_a = 1.0 / market.alpha1
        v = _slack(other_price, c, market.alpha2, mu)

        def f(p):
            u = max((p / c) ** inv_a, floor)
            lam1, lam2 = regime_rates(case, u, v, mu, gamma)
            return (lam1 * p + lam2 * delta) / lam_d
    else:
        inv_a = 1.0 / market.alpha2
        u = _slack(other_price, c, market.alpha1, mu)

        def f(p):
            v = max((p / c) ** inv_a, floor)
            _, lam2 = regime_rates(case, u, v, mu, gamma)
            return lam2 * (p - delta) / lam_d
    return f


def _segment_best(queue, market, operator, other_price, a, b, npts):
    """Maximise own profit on the open regime segment ``(a, b)``.

    Returns a point strictly inside the segment and its profit.
    """
    scalar, _ = _profit_of(queue, market, operator)
    mid = 0.5 * (a + b)
    p1, p2 = (mid, other_price) if operator == "NO" else (other_price, mid)
    case = equilibrium_counts(queue, market, p1, p2)[0]
    own_active = case in (("I", "II") if operator == "NO" else ("I", "III"))
    if not own_active:
        # profit does not depend on the own price here; the smallest price of
        # the open segment represents it
        x = a + PRICE_TOL
        return x, (scalar(x, other_price) if operator == "NO" else scalar(other_price, x))
    if case == "I" and abs(queue.gamma - 0.5) <= 1e-12:
        f = (lambda x: scalar(x, other_price)) if operator == "NO" else (lambda x: scalar(other_price, x))
    else:
        f = _segment_objective(queue, market, operator, other_price, case)
    if operator == "NO" and case == "II":
        # lone-base profit is concave in the price: clip the unconstrained optimum
        # stay inside the open segment, as the golden search would
        x = min(max(baseline_closed_form(queue, market)[0], a + PRICE_TOL), b - PRICE_TOL)
        return x, f(x)
    xs = np.linspace(a, b, npts)
    fs = [f(x) for x in xs]
    k = argmax_smallest(xs, fs)
    x, fx = golden_max(f, xs[max(k - 1, 0)], xs[min(k + 1, npts - 1)], tol=PRICE_TOL)
    if not fx > fs[k]:
        x = float(xs[k])
    # the regime formula may jump at the segment ends (degenerate splits), so
    # an optimum found there is only approached from inside
    x = min(max(x, a + PRICE_TOL), b - PRICE_TOL)
    return x, f(x)


def best_response(
    queue: QueueConfig,
    market: MarketParams,
    operator: Operator,
    other_price: float,
    npts: int = 9,
) -> tuple[float, float]:
    """Profit-maximising own price against a fixed rival price.

    The own-price interval ``[0, cap]`` is cut at the Wardrop region
    boundaries, where the profit has kinks, and each piece is searched by
    grid plus golden section.  Ties go to the smallest price.
    """
    scalar, _ = _profit_of(queue, market, operator)
    if operator == "NO":
        f = lambda x: scalar(x, other_price)  # noqa: E731
    else:
        f = lambda x: scalar(other_price, x)  # noqa: E731
    pts = _own_breakpoints(queue, market, operator, other_price)
    xs = list(pts)
    fs = [f(x) for x in pts]
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= PRICE_TOL:
            continue
        found = _segment_best(queue, market, operator, other_price, a, b, npts)
        if found is not None and a < found[0] < b:
            xs.append(found[0])
            fs.append(found[1])
    k = argmax_smallest(xs, fs, rtol=TIE_RTOL)
    return float(xs[k]), float(fs[k])


def nash_regret(queue: QueueConfig, market: MarketParams, p1: float, p2: float, br1=None, br2=None):
    """Largest profit gain each operator could get by deviating unilaterally."""
    pi1, pi2 = _strategic_profits(queue, market, p1, p2)
    br1 = br1 if br1 is not None else best_response(queue, market, "NO", p2)
    br2 = br2 if br2 is not None else best_response(queue, market, "VO", p1)
    return max(br1[1] - pi1, 0.0), max(br2[1] - pi2, 0.0)


def deviation_gain(queue: QueueConfig, market: MarketParams, p1: float, p2: float, npts: int = 2001):
    """Best profit gain over a uniform deviation grid of each operator's price."""
    caps = _caps(queue, market)
    pi1, pi2 = _strategic_profits(queue, market, p1, p2)
    s1, v1 = _profit_of(queue, market, "NO")
    s2, v2 = _profit_of(queue, market, "VO")
    d1 = float(np.max(v1(np.linspace(0.0, caps[0], npts), p2))) - pi1
    d2 = float(np.max(v2(p1, np.linspace(0.0, caps[1], npts)))) - pi2
    return max(d1, 0.0), max(d2, 0.0)


def is_nash(queue, market, p1, p2, tol: float = NASH_TOL, br1=None, br2=None) -> bool:
    r1, r2 = nash_regret(queue, market, p1, p2, br1, br2)
    return r1 <= tol and r2 <= tol


def _damped_br(queue, market, start, damping=0.5, max_iter=500, step_tol=1e-8, known=(), window=25, merge_tol=1e-7):
    """Damped alternating best responses from ``start``.

    Stops early when the iterate joins a known fixed point or when the step
    size stops shrinking geometrically (creeping along a kink).
    """
    p1, p2 = start
    moves = []
    for it in range(1, max_iter + 1):
        b1, _ = best_response(queue, market, "NO", p2)
        q1 = p1 + damping * (b1 - p1)
        b2, _ = best_response(queue, market, "VO", q1)
        q2 = p2 + damping * (b2 - p2)
        moved = max(abs(q1 - p1), abs(q2 - p2))
        p1, p2 = q1, q2
        moves.append(moved)
        if moved < step_tol:
            return p1, p2, it, "converged"
        for k1, k2 in known:
            if abs(p1 - k1) < merge_tol and abs(p2 - k2) < merge_tol:
                return k1, k2, it, "merged"
        if it >= 4 * window and it % window == 0:
            recent = max(moves[-window:])
            before = max(moves[-2 * window:-window])
            if recent > 0.5 * before:
                return p1, p2, it, "stalled"
    return p1, p2, max_iter, "max_iter"


def _composite_scan(queue, market, npts=41, max_bisect=60):
    """Fixed points of ``p2 -> BR2(BR1(p2))`` located by sign changes."""
    cap2 = market.cap(queue.mu, 2)

    def gap(p2):
        b1, _ = best_response(queue, market, "NO", p2)
        b2, _ = best_response(queue, market, "VO", b1)
        return b2 - p2, b1

    grid = np.linspace(0.0, cap2, npts)
    vals = [gap(x) for x in grid]
    found = []
    for k in range(npts - 1):
        (ga, _), (gb, _) = vals[k], vals[k + 1]
        if ga == 0.0:
            found.append((vals[k][1], float(grid[k])))
        elif ga > 0 > gb:
            lo, hi = float(grid[k]), float(grid[k + 1])
            for _ in range(max_bisect):
                mid = 0.5 * (lo + hi)
                if gap(mid)[0] > 0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < PRICE_TOL:
                    break
            for x in (lo, hi):
                found.append((gap(x)[1], x))
    return found


class _Verifier:
    """Nash checks with memoised best responses."""

    def __init__(self, queue, market, tol=NASH_TOL, cache=None):
        self.queue, self.market, self.tol = queue, market, tol
        self._br = {} if cache is None else cache

    def with_tol(self, tol):
        return _Verifier(self.queue, self.market, tol, self._br)

    def br(self, operator, other):
        key = (operator, other)
        if key not in self._br:
            self._br[key] = best_response(self.queue, self.market, operator, other)
        return self._br[key]

    def __call__(self, p1, p2):
        r1, r2 = nash_regret(self.queue, self.market, p1, p2, self.br("NO", p2), self.br("VO", p1))
        return r1 <= self.tol and r2 <= self.tol


def _walk(verify, point, move, cap_lo, cap_hi, step, max_steps, resolution=1e-9):
    """Follow verified equilibria from ``point`` through ``move(t)``.

    ``move`` maps a scalar coordinate to a candidate price pair; the walk
    advances in steps of ``step`` while candidates verify, then bisects the
    last step to ``resolution``.  Returns the visited pairs.
    """
    t, visited = point, []
    for _ in range(max_steps):
        nxt = t + step
        if not cap_lo <= nxt <= cap_hi:
            break
        cand = move(nxt)
        if not verify(*cand):
            ok, bad = t, nxt
            while abs(bad - ok) > resolution:
                mid = 0.5 * (ok + bad)
                cand = move(mid)
                if verify(*cand):
                    ok = mid
                    visited.append(cand)
                else:
                    bad = mid
            break
        visited.append(cand)
        t = nxt
    return visited


def _explore_continuum(verify, p1, p2, caps, walk_step, max_walk):
    """Verified equilibria reachable from ``(p1, p2)``: straight moves of
    one price, and moves of one price with the rival re-optimising."""
    pool = []
    s1, s2 = walk_step * caps[0], walk_step * caps[1]
    moves = [
        (p1, lambda x: (x, p2), caps[0], s1),
        (p2, lambda y: (p1, y), caps[1], s2),
        (p1, lambda x: (x, verify.br("VO", x)[0]), caps[0], s1),
        (p2, lambda y: (verify.br("NO", y)[0], y), caps[1], s2),
    ]
    for origin, move, cap, step in moves:
        for direction in (-1.0, 1.0):
            pool.extend(_walk(verify, origin, move, 0.0, cap, direction * step, max_walk))
    return pool


def solve_strategic(
    queue: QueueConfig,
    market: MarketParams,
    damping: float = 0.5,
    max_iter: int = 500,
    walk_step: float = 1e-3,
    max_walk: int = 1000,
) -> EquilibriumResult:
    """Nash equilibrium of the strategic pricing game.

    Damped alternating best responses are run from a 3x3 grid of starts; if
    none of them yields a verified equilibrium, fixed points of the composed
    best-response map are bracketed on a price grid.  Every candidate must
    pass the unilateral-deviation check.  Verified equilibria are then
    followed through the continuum they may belong to, and the member with
    the largest aggregate profit is returned (ties to the lowest prices).
    """
    caps = _caps(queue, market)
    verify = _Verifier(queue, market)
    starts = [(f1 * caps[0], f2 * caps[1]) for f1 in (0.25, 0.5, 0.75) for f2 in (0.25, 0.5, 0.75)]
    runs = []
    known: list[tuple[float, float]] = []
    for s in starts:
        p1, p2, iters, status = _damped_br(queue, market, s, damping, max_iter, known=known)
        runs.append({"start": s, "end": (p1, p2), "iterations": iters, "status": status})
        if status in ("converged", "merged"):
            known.append((p1, p2))

    def nonzero(p):
        return p[0] > PRICE_TOL or p[1] > PRICE_TOL

    verified = [p for p in dict.fromkeys(known) if nonzero(p) and verify(*p)]
    used_scan = not verified
    if used_scan:
        verified = [p for p in dict.fromkeys(_composite_scan(queue, market)) if nonzero(p) and verify(*p)]
    if not verified:
        raise NoEquilibriumFound(
            f"no verified non-zero equilibrium at gamma={queue.gamma}, "
            f"alpha=({market.alpha1}, {market.alpha2}), delta={market.delta}",
            runs,
        )

    # continuum members need a tenth of the regret tolerance: selecting the
    # largest aggregate profit would otherwise drift to the edge of the
    # tolerance band rather than stay on genuine equilibria
    walk_verify = verify.with_tol(WALK_TOL)
    pool = list(verified)
    for p in verified:
        pool.extend(_explore_continuum(walk_verify, p[0], p[1], caps, walk_step, max_walk))
    pool = [p for p in dict.fromkeys(pool) if nonzero(p)]

    scored = []
    for p1, p2 in pool:
        pi1, pi2 = _strategic_profits(queue, market, p1, p2)
        scored.append((pi1 + pi2, p1, p2))
    top = max(s[0] for s in scored)
    near = [s for s in scored if s[0] >= top - TIE_RTOL * max(1.0, abs(top))]
    _, p1, p2 = min(near, key=lambda s: (s[1], s[2]))

    outcome = wardrop_duopoly(queue, market, PricePair(p1, p2))
    pi1, pi2 = profit_strategic(outcome.n1_star, p1, outcome.n2_star, p2, market.delta)
    ends = [r["end"] for r in runs if r["status"] in ("converged", "merged")]
    disagreement = any(max(abs(a[0] - b[0]), abs(a[1] - b[1])) > 1e-6 for a in ends for b in ends)
    diagnostics = {
        "runs": runs,
        "iterations": sum(r["iterations"] for r in runs),
        "converged": not used_scan,
        "used_scan": used_scan,
        "verified": verified,
        "multistart_disagreement": disagreement,
        "pset": (
            min(p[0] for p in pool), max(p[0] for p in pool),
            min(p[1] for p in pool), max(p[1] for p in pool),
        ),
    }
    return EquilibriumResult(
        "strategic", p1, p2, outcome, ProfitReport("strategic", pi1=pi1, pi2=pi2), diagnostics
    )
