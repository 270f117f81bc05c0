"""Mean packet system times of the shared network.

The network is a single M/M/1 queue.  With two subscriber bases it is
served under discriminatory processor sharing (DPS): class 1 packets carry
weight ``1 - gamma`` and class 2 packets weight ``gamma``.  A lone base sees a
plain M/M/1-PS queue.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateDenominator, InvalidConfig, UnstableLoad

STAB_EPS = 1e-9


@dataclass(frozen=True)
class QueueConfig:
    """Service rate ``mu``, per-subscriber packet rate ``lambda_d`` and the
    slice weight ``gamma`` given to the second subscriber base."""

    mu: float = 1.0
    lambda_d: float = 0.01
    gamma: float = 0.5

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidConfig(f"mu must be positive, got {self.mu}")
        if not self.lambda_d > 0:
            raise InvalidConfig(f"lambda_d must be positive, got {self.lambda_d}")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidConfig(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def weights(self) -> tuple[float, float]:
        return 1.0 - self.gamma, self.gamma

    @property
    def capacity(self) -> float:
        """Subscriber count that saturates the server."""
        return self.mu / self.lambda_d


@dataclass(frozen=True)
class Load:
    """Subscriber counts; real-valued (fluid limit)."""

    n1: float = 0.0
    n2: float = 0.0

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise InvalidConfig(f"subscriber counts must be >= 0, got {self.n1}, {self.n2}")

    @property
    def total(self) -> float:
        return self.n1 + self.n2


def check_stability(cfg: QueueConfig, load: Load, margin: float = 0.0) -> bool:
    """True iff ``lambda_d * (n1 + n2) < mu * (1 - margin)``."""
    return cfg.lambda_d * (load.n1 + load.n2) < cfg.mu * (1.0 - margin)


def delay_dps(cfg: QueueConfig, load: Load) -> tuple[float, float]:
    """Mean system times ``(T1, T2)`` of the two classes under DPS."""
    mu, gamma = cfg.mu, cfg.gamma
    lam1 = cfg.lambda_d * load.n1
    lam2 = cfg.lambda_d * load.n2
    slack = mu - lam1 - lam2
    if not slack > 0:
        raise UnstableLoad(f"offered load {lam1 + lam2} >= service rate {mu}")
    inner = mu - (1.0 - gamma) * lam1 - gamma * lam2
    if not inner > 0:
        raise DegenerateDenominator(f"inner DPS denominator {inner} <= 0")
    # shared factor computed once so lam1*T1 + lam2*T2 telescopes exactly
    base = 1.0 / slack
    skew = (2.0 * gamma - 1.0) / inner
    t1 = base * (1.0 + lam2 * skew)
    t2 = base * (1.0 - lam1 * skew)
    return t1, t2


def delay_baseline_ps(cfg: QueueConfig, n1: float) -> float:
    """Mean system time of a lone subscriber base (M/M/1-PS)."""
    lam1 = cfg.lambda_d * n1
    if not lam1 < cfg.mu:
        raise UnstableLoad(f"offered load {lam1} >= service rate {cfg.mu}")
    return 1.0 / (cfg.mu - lam1)
