"""Pricing and subscription equilibria for two subscriber bases sharing one
network slice-wise through a discriminatory processor sharing queue."""
from .errors import (
    DegenerateDenominator,
    DegenerateSplit,
    DomainError,
    DPSMarketError,
    InvalidConfig,
    NoConvergence,
    NoEquilibriumFound,
    OptimizerFailure,
    UnstableLoad,
)
from .feasibility import FeasibilityReport, assess, compare_total_subscribers
from .market import MarketParams, PricePair, ProfitReport, utility
from .queueing import Load, QueueConfig, check_stability, delay_baseline_ps, delay_dps
from .simulator import SimConfig, SimResult, simulate_dps, validate_closed_form
from .stage1 import (
    EquilibriumResult,
    best_response,
    deviation_gain,
    is_nash,
    solve_baseline,
    solve_monopolistic,
    solve_strategic,
)
from .wardrop import (
    RegionBoundaries,
    WardropOutcome,
    region_boundaries,
    region_map,
    wardrop_baseline,
    wardrop_duopoly,
    wardrop_oracle,
)

__all__ = [name for name in dir() if not name.startswith("_")]
