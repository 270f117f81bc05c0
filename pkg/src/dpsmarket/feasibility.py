"""Whether the operators have an incentive to adopt each business model.

Every condition compares optimal profits against the lone-operator
baseline.  Profits come from numeric optimisers, so comparisons are made
with a margin of ``1e-6 * pi0`` in favour of the condition: a profit within
the margin of the baseline counts as matching it.  The strict and weak
readings of each condition are both exposed, as are the strict
comparisons without margin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .market import MarketParams
from .queueing import QueueConfig
from .stage1 import EquilibriumResult, solve_baseline, solve_monopolistic, solve_strategic

MARGIN_REL = 1e-6


@dataclass(frozen=True)
class Flags:
    monopolistic_feasible: bool  # pi_m > pi0
    monopolistic_acquiesce: bool  # pi_m >= pi0
    strategic_feasible: bool  # pi1 + pi2 > pi0, a lump sum can settle the entry
    no_acquiesces: bool  # pi1 >= pi0 without any transfer
    vo_enters: bool  # pi2 >= 0
    # the same strict comparisons without any margin
    monopolistic_exceeds_raw: bool
    strategic_exceeds_raw: bool


def evaluate_flags(pi0: float, pi_m: float, pi1: float, pi2: float, margin: float) -> Flags:
    return Flags(
        monopolistic_feasible=bool(pi_m > pi0 - margin),
        monopolistic_acquiesce=bool(pi_m >= pi0 - margin),
        strategic_feasible=bool(pi1 + pi2 > pi0 - margin),
        no_acquiesces=bool(pi1 >= pi0 - margin),
        vo_enters=bool(pi2 >= -margin),
        monopolistic_exceeds_raw=bool(pi_m > pi0),
        strategic_exceeds_raw=bool(pi1 + pi2 > pi0),
    )


def lump_sum_interval(pi0: float, pi1: float, pi2: float) -> Optional[tuple[float, float]]:
    """Transfers ``m`` from VO to NO that leave both at least as well off.

    ``[max(0, pi0 - pi1), pi2]``, or None when that interval is empty.
    """
    lo, hi = max(0.0, pi0 - pi1), pi2
    return (lo, hi) if lo <= hi else None


@dataclass(frozen=True)
class FeasibilityReport:
    pi0_star: float
    pi_m_star: float
    pi1_star: float
    pi2_star: float
    monopolistic_feasible: bool
    strategic_feasible: bool
    lump_sum_range: Optional[tuple[float, float]]
    totals: tuple[float, float]  # (monopolistic, strategic) subscribers
    flags: Flags
    margin: float

    @property
    def n_total_monopolistic(self) -> float:
        return self.totals[0]

    @property
    def n_total_strategic(self) -> float:
        return self.totals[1]

    def is_consistent(self) -> bool:
        """Flags and interval agree with the stored profit numbers."""
        flags = evaluate_flags(self.pi0_star, self.pi_m_star, self.pi1_star, self.pi2_star, self.margin)
        return (
            flags == self.flags
            and flags.monopolistic_feasible == self.monopolistic_feasible
            and flags.strategic_feasible == self.strategic_feasible
            and lump_sum_interval(self.pi0_star, self.pi1_star, self.pi2_star) == self.lump_sum_range
        )


def build_report(base: EquilibriumResult, mono: EquilibriumResult, strat: EquilibriumResult) -> FeasibilityReport:
    pi0 = base.profits.pi0
    pi_m = mono.profits.pi_m
    pi1, pi2 = strat.profits.pi1, strat.profits.pi2
    margin = MARGIN_REL * pi0
    flags = evaluate_flags(pi0, pi_m, pi1, pi2, margin)
    return FeasibilityReport(
        pi0_star=pi0,
        pi_m_star=pi_m,
        pi1_star=pi1,
        pi2_star=pi2,
        monopolistic_feasible=flags.monopolistic_feasible,
        strategic_feasible=flags.strategic_feasible,
        lump_sum_range=lump_sum_interval(pi0, pi1, pi2),
        totals=(mono.n_total, strat.n_total),
        flags=flags,
        margin=margin,
    )


def assess(queue: QueueConfig, market: MarketParams) -> FeasibilityReport:
    """Solve all three scenarios on the same parameters and compare them."""
    return build_report(
        solve_baseline(queue, market),
        solve_monopolistic(queue, market),
        solve_strategic(queue, market),
    )


def compare_total_subscribers(
    queue: QueueConfig,
    market: MarketParams,
    mono: Optional[EquilibriumResult] = None,
    strat: Optional[EquilibriumResult] = None,
) -> tuple[float, float, bool]:
    """``(n_monopolistic, n_strategic, strategic_exceeds)``.

    Already solved equilibria may be passed in to avoid solving again.
    """
    mono = mono or solve_monopolistic(queue, market)
    strat = strat or solve_strategic(queue, market)
    n_m, n_s = mono.n_total, strat.n_total
    tol = 1e-9 * max(1.0, abs(n_m))
    return n_m, n_s, bool(n_s > n_m + tol and math.isfinite(n_s))
