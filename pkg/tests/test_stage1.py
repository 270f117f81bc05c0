import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsmarket import MarketParams, PricePair, QueueConfig, wardrop_duopoly
from dpsmarket.market import profit_monopolistic, profit_strategic
from dpsmarket.stage1 import (
    NASH_TOL,
    baseline_closed_form,
    best_response,
    deviation_gain,
    is_nash,
    solve_baseline,
    solve_monopolistic,
    solve_strategic,
)
from dpsmarket.wardrop import equilibrium_counts

Q = QueueConfig(1.0, 0.01, 0.5)


def test_baseline_reference_values():
    r = solve_baseline(Q, MarketParams(1, 0.6, 0.6))
    assert r.p1 == pytest.approx(0.375 ** 0.6, abs=1e-12)
    assert r.p1 == pytest.approx(0.5551, abs=1e-4)
    assert r.profits.pi0 == pytest.approx(34.70, abs=5e-3)
    assert r.p2 is None


def test_baseline_linear_sensitivity():
    r = solve_baseline(Q, MarketParams(1, 1.0, 1.0))
    assert r.p1 == pytest.approx(0.5, abs=1e-15)
    assert r.profits.pi0 == pytest.approx(25.0, abs=1e-12)


def test_baseline_against_fine_grid():
    m = MarketParams(1, 0.6, 0.6)
    p = np.linspace(0, 1, 1_000_001)
    n = (1 - p ** (1 / 0.6)) / 0.01
    k = int(np.argmax(n * p))
    assert abs(p[k] - solve_baseline(Q, m).p1) <= 1e-6


@pytest.mark.parametrize("alpha", [0.2, 0.4, 0.6, 0.8, 1.0])
def test_baseline_numeric_cross_check(alpha):
    d = solve_baseline(Q, MarketParams(1, alpha, alpha)).diagnostics
    assert d["dp"] <= 1e-6
    assert d["dpi_rel"] <= 1e-8


@pytest.mark.parametrize("alpha", [0.4, 0.6, 0.8])
def test_monopolistic_symmetric_pricing(alpha):
    r = solve_monopolistic(Q, MarketParams(1, alpha, alpha))
    assert abs(r.p1 - r.p2) <= 1e-4


@pytest.mark.parametrize("gamma", [0.0, 0.2, 0.35])
def test_monopolistic_gamma_mirror(gamma):
    m = MarketParams(1, 0.6, 0.6)
    a = solve_monopolistic(QueueConfig(1, 0.01, gamma), m)
    b = solve_monopolistic(QueueConfig(1, 0.01, 1 - gamma), m)
    assert a.profits.pi_m == pytest.approx(b.profits.pi_m, rel=1e-7)
    assert a.p1 == pytest.approx(b.p2, abs=1e-4)


def test_monopolistic_ignores_delta():
    q = QueueConfig(1, 0.01, 0.2)
    a = solve_monopolistic(q, MarketParams(1, 0.6, 0.8, 0.0))
    b = solve_monopolistic(q, MarketParams(1, 0.6, 0.8, 0.2))
    assert (a.p1, a.p2, a.profits.pi_m) == (b.p1, b.p2, b.profits.pi_m)


def test_monopolistic_result_consistency():
    q, m = QueueConfig(1, 0.01, 0.1), MarketParams(1, 0.6, 0.8)
    r = solve_monopolistic(q, m)
    caps = m.cap(1, 1), m.cap(1, 2)
    assert 0 <= r.p1 <= caps[0] and 0 <= r.p2 <= caps[1]
    assert r.outcome == wardrop_duopoly(q, m, PricePair(r.p1, r.p2))
    assert r.profits.pi_m == profit_monopolistic(r.outcome.n1_star, r.p1, r.outcome.n2_star, r.p2)
    # no grid point beats the optimum
    g = np.linspace(0, 1, 121)
    best = max(
        profit_monopolistic(*(lambda o: (o[1], a, o[2], b))(equilibrium_counts(q, m, a, b)))
        for a in g
        for b in g
    )
    assert r.profits.pi_m >= best - 1e-9


def test_vo_best_response_when_fee_exceeds_cap():
    q, m = QueueConfig(1, 0.01, 0.3), MarketParams(1, 0.6, 0.6, delta=1.2)
    p, pi = best_response(q, m, "VO", 0.5)
    assert pi == 0.0
    # smallest price at which no VO subscriber is left
    _, _, n2, _ = equilibrium_counts(q, m, 0.5, p)
    assert n2 == pytest.approx(0.0, abs=1e-9)
    grid = np.linspace(0, p, 200)[:-1]
    assert all(equilibrium_counts(q, m, 0.5, x)[2] > 0 for x in grid)


def test_vo_best_response_without_demand_picks_smallest_price():
    # rival free: base 1 takes the whole queue whatever the VO charges
    q, m = QueueConfig(1, 0.01, 0.0), MarketParams(1, 0.6, 0.6, delta=0.1)
    p, pi = best_response(q, m, "VO", 0.0)
    assert pi == 0.0
    assert p == 0.0


@pytest.mark.parametrize("gamma, p2", [(0.2, 0.3), (0.7, 0.1), (0.5, 0.4)])
def test_no_best_response_dominates_grid(gamma, p2):
    q, m = QueueConfig(1, 0.01, gamma), MarketParams(1, 0.6, 0.6, delta=0.15)
    p, pi = best_response(q, m, "NO", p2)
    grid = np.linspace(0, 1, 4001)
    vals = [profit_strategic(*(lambda o: (o[1], x, o[2], p2))(equilibrium_counts(q, m, x, p2)), 0.15)[0] for x in grid]
    assert pi >= max(vals) - 1e-9
    fee_floor = max(equilibrium_counts(q, m, x, p2)[2] * 0.15 for x in grid)
    assert pi >= fee_floor - 1e-12 * fee_floor


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
def test_strategic_is_verified_nash(gamma):
    q, m = QueueConfig(1, 0.01, gamma), MarketParams(1, 0.6, 0.6, delta=0.15)
    r = solve_strategic(q, m)
    assert is_nash(q, m, r.p1, r.p2)
    assert max(deviation_gain(q, m, r.p1, r.p2)) <= NASH_TOL
    br1, _ = best_response(q, m, "NO", r.p2)
    br2, _ = best_response(q, m, "VO", r.p1)
    lo1, hi1, lo2, hi2 = r.diagnostics["pset"]
    # on a continuum the best response need not reproduce the selected member
    if hi1 - lo1 < 1e-6 and hi2 - lo2 < 1e-6:
        assert abs(br1 - r.p1) <= 1e-4 and abs(br2 - r.p2) <= 1e-4
    assert lo1 <= r.p1 <= hi1 and lo2 <= r.p2 <= hi2
    pi1, pi2 = profit_strategic(r.outcome.n1_star, r.p1, r.outcome.n2_star, r.p2, 0.15)
    assert (pi1, pi2) == (r.profits.pi1, r.profits.pi2)
    assert r.p1 > 0 or r.p2 > 0


def test_strategic_symmetric_at_half():
    r = solve_strategic(Q, MarketParams(1, 0.6, 0.6, delta=0.15))
    assert abs(r.p1 - r.p2) <= 1e-4


@pytest.mark.parametrize("gamma", [0.2, 0.8])
def test_strategic_class_swap_without_fee(gamma):
    a = solve_strategic(QueueConfig(1, 0.01, gamma), MarketParams(1, 0.6, 0.8, 0.0))
    b = solve_strategic(QueueConfig(1, 0.01, 1 - gamma), MarketParams(1, 0.8, 0.6, 0.0))
    assert a.p1 == pytest.approx(b.p2, abs=1e-4)
    assert a.p2 == pytest.approx(b.p1, abs=1e-4)
    assert a.profits.pi1 == pytest.approx(b.profits.pi2, rel=1e-6)


@pytest.mark.parametrize("gamma", [0.0, 0.3, 0.5, 0.9])
def test_strategic_dominated_by_monopolistic(gamma):
    q = QueueConfig(1, 0.01, gamma)
    s = solve_strategic(q, MarketParams(1, 0.6, 0.8, 0.1))
    mono = solve_monopolistic(q, MarketParams(1, 0.6, 0.8))
    assert s.profits.aggregate <= mono.profits.pi_m + 1e-6


@settings(max_examples=15)
@given(st.floats(0.0, 1.0), st.floats(0.2, 1.0), st.floats(0.0, 1.0), st.sampled_from(["NO", "VO"]))
def test_best_response_beats_random_deviations(gamma, a2, other, who):
    q, m = QueueConfig(1, 0.01, gamma), MarketParams(1, 0.6, a2, 0.1)
    p, pi = best_response(q, m, who, other)
    xs = np.random.default_rng(0).uniform(0, m.cap(1, 1 if who == "NO" else 2), 300)
    for x in xs:
        p1, p2 = (x, other) if who == "NO" else (other, x)
        _, n1, n2, _ = equilibrium_counts(q, m, p1, p2)
        val = profit_strategic(n1, p1, n2, p2, 0.1)[0 if who == "NO" else 1]
        assert val <= pi + 1e-9
