"""Event-driven simulation of the two-class M/M/1 queue under DPS.

Between events every rate is constant, so the next event comes from an
exponential race: arrivals at ``lambda_d * n1`` and ``lambda_d * n2``, and
while the system is non-empty one departure at total rate ``mu``.  The
departing job's class is drawn in proportion to the class weight times the
number of class jobs present, and the job itself uniformly within its
class (memorylessness makes the residual work irrelevant).

Each replication draws from its own child of ``numpy.random.SeedSequence``,
so results do not depend on how replications are scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidConfig, UnstableLoad
from .queueing import Load, QueueConfig, check_stability, delay_dps

Z95 = 1.959963984540054
_BLOCK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    queue: QueueConfig
    load: Load
    measured_departures: int = 100_000
    warmup_departures: Optional[int] = None  # None: 10% of measured
    replications: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.measured_departures < 1:
            raise InvalidConfig("measured_departures must be at least 1")
        if self.replications < 1:
            raise InvalidConfig("replications must be at least 1")
        if self.warmup_departures is not None and self.warmup_departures < 0:
            raise InvalidConfig("warmup_departures must be non-negative")
        if self.load.total <= 0:
            raise InvalidConfig("at least one class needs a positive load")

    @property
    def warmup(self) -> int:
        if self.warmup_departures is None:
            return self.measured_departures // 10
        return self.warmup_departures


@dataclass(frozen=True)
class SimResult:
    """Replication-averaged mean system times with 95% half-widths.

    A class with no load has NaN mean and half-width.  Half-widths are NaN
    for a single replication.
    """

    mean_T1: float
    mean_T2: float
    ci95_T1: float
    ci95_T2: float
    departures_counted: tuple[int, int]
    per_replication: tuple[tuple[float, float], ...] = field(default=(), compare=False)


def _replicate(queue: QueueConfig, load: Load, warmup: int, measured: int, seed_seq) -> tuple[float, float, int, int]:
    """One replication; returns per-class mean sojourn and departure counts."""
    rng = np.random.default_rng(seed_seq)
    mu, gamma = queue.mu, queue.gamma
    w1, w2 = 1.0 - gamma, gamma
    lam1 = queue.lambda_d * load.n1
    lam = lam1 + queue.lambda_d * load.n2

    jobs1: list[float] = []
    jobs2: list[float] = []
    t = 0.0
    seen = 0
    sums = [0.0, 0.0]
    counts = [0, 0]
    total = warmup + measured

    expo: list[float] = []
    unif: list[float] = []
    i = _BLOCK
    while seen < total:
        if i >= _BLOCK:
            # three uniforms per event: race winner, class, job
            expo = rng.standard_exponential(_BLOCK).tolist()
            unif = rng.random(3 * _BLOCK).tolist()
            i = 0
        k1, k2 = len(jobs1), len(jobs2)
        busy = k1 + k2 > 0
        rate = lam + mu if busy else lam
        t += expo[i] / rate
        x = unif[3 * i] * rate
        if x < lam1:
            jobs1.append(t)
        elif x < lam:
            jobs2.append(t)
        else:
            weight = w1 * k1 + w2 * k2
            if weight > 0.0:
                r1 = mu * w1 * k1 / weight
                r2 = mu * w2 * k2 / weight
            else:
                # all present jobs carry zero weight: they share the server
                r1 = mu * k1 / (k1 + k2)
                r2 = mu * k2 / (k1 + k2)
            assert abs(r1 + r2 - mu) <= 1e-9 * mu, "departure rates must add up to mu"
            if unif[3 * i + 1] * mu < r1:
                jobs, cls = jobs1, 0
            else:
                jobs, cls = jobs2, 1
            j = int(unif[3 * i + 2] * len(jobs))
            arrived = jobs[j]
            jobs[j] = jobs[-1]
            jobs.pop()
            seen += 1
            if seen > warmup:
                sums[cls] += t - arrived
                counts[cls] += 1
        i += 1
    means = tuple(s / n if n else math.nan for s, n in zip(sums, counts))
    return means[0], means[1], counts[0], counts[1]


def _summary(values: np.ndarray) -> tuple[float, float]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    if values.size < 2:
        return mean, math.nan
    return mean, float(Z95 * values.std(ddof=1) / math.sqrt(values.size))


def simulate_dps(cfg: SimConfig, workers: int = 1) -> SimResult:
    """Run ``cfg.replications`` independent replications and pool them.

    With ``workers > 1`` replications run in a process pool; results are
    merged in replication order, so the outcome is the same either way.
    """
    if not check_stability(cfg.queue, cfg.load):
        raise UnstableLoad(
            f"offered load {cfg.queue.lambda_d * cfg.load.total} >= service rate {cfg.queue.mu}"
        )
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    args = [(cfg.queue, cfg.load, cfg.warmup, cfg.measured_departures, s) for s in children]
    if workers > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_replicate, *zip(*args)))
    else:
        runs = [_replicate(*a) for a in args]
    arr = np.array([(r[0], r[1]) for r in runs], dtype=float)
    m1, h1 = _summary(arr[:, 0])
    m2, h2 = _summary(arr[:, 1])
    return SimResult(
        mean_T1=m1,
        mean_T2=m2,
        ci95_T1=h1,
        ci95_T2=h2,
        departures_counted=(sum(r[2] for r in runs), sum(r[3] for r in runs)),
        per_replication=tuple((r[0], r[1]) for r in runs),
    )


@dataclass(frozen=True)
class ClassCheck:
    analytic: float
    observed: float
    half_width: float
    rel_err: float
    within_ci: bool
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    result: SimResult
    classes: tuple[Optional[ClassCheck], Optional[ClassCheck]]  # None: class not loaded

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.classes if c is not None)


def validate_closed_form(cfg: SimConfig, tol_rel: float = 0.02, workers: int = 1) -> ValidationReport:
    """Simulate and compare with the closed-form means, class by class.

    A class passes if the analytic mean lies inside the 95% interval or the
    relative error is at most ``tol_rel``.
    """
    res = simulate_dps(cfg, workers=workers)
    analytic = delay_dps(cfg.queue, cfg.load)
    checks = []
    for a, m, h, n in zip(analytic, (res.mean_T1, res.mean_T2), (res.ci95_T1, res.ci95_T2), (cfg.load.n1, cfg.load.n2)):
        if n <= 0 or not math.isfinite(m):
            checks.append(None)
            continue
        rel = abs(m - a) / a
        inside = math.isfinite(h) and abs(m - a) <= h
        checks.append(ClassCheck(a, m, h, rel, inside, inside or rel <= tol_rel))
    return ValidationReport(res, (checks[0], checks[1]))
