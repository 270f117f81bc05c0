"""User utility and operator profits for the three business scenarios."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .errors import DomainError, InvalidConfig

Scenario = Literal["baseline", "monopolistic", "strategic"]


@dataclass(frozen=True)
class MarketParams:
    """Conversion factor ``c``, delay sensitivities of the two subscriber
    bases and the per-subscriber fee ``delta`` the virtual operator pays."""

    c: float = 1.0
    alpha1: float = 0.6
    alpha2: float = 0.6
    delta: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidConfig(f"c must be positive, got {self.c}")
        for name in ("alpha1", "alpha2"):
            a = getattr(self, name)
            if not 0.0 < a <= 1.0:
                raise InvalidConfig(f"{name} must lie in (0, 1], got {a}")
        if not self.delta >= 0:
            raise InvalidConfig(f"delta must be >= 0, got {self.delta}")

    def cap(self, mu: float, which: int) -> float:
        """Price above which base ``which`` never subscribes: ``c * mu**alpha``."""
        alpha = self.alpha1 if which == 1 else self.alpha2
        return self.c * mu ** alpha


@dataclass(frozen=True)
class PricePair:
    p1: float
    p2: float

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0:
            raise InvalidConfig(f"prices must be >= 0, got {self.p1}, {self.p2}")


@dataclass(frozen=True)
class ProfitReport:
    """Profits per unit time.  Only the fields of ``scenario`` are set."""

    scenario: Scenario
    pi0: float | None = None
    pi_m: float | None = None
    pi1: float | None = None
    pi2: float | None = None

    @property
    def aggregate(self) -> float:
        if self.scenario == "baseline":
            return self.pi0
        if self.scenario == "monopolistic":
            return self.pi_m
        return self.pi1 + self.pi2


def utility(T: float, alpha: float, p: float, c: float) -> float:
    """Net utility ``c * T**-alpha - p`` of a subscriber facing delay ``T``."""
    if not T > 0:
        raise DomainError(f"delay must be positive, got {T}")
    return c * T ** (-alpha) - p


def profit_baseline(n1: float, p1: float) -> float:
    return n1 * p1


def profit_monopolistic(n1: float, p1: float, n2: float, p2: float) -> float:
    return n1 * p1 + n2 * p2


def profit_strategic(n1: float, p1: float, n2: float, p2: float, delta: float) -> tuple[float, float]:
    """Profits ``(pi1, pi2)`` when the VO pays ``delta`` per subscriber."""
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    return n1 * p1 + n2 * delta, n2 * (p2 - delta)
