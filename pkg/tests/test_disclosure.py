import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qco.core import Instance, Product
from qco.disclosure import (compare_disclosure, compare_rates, disclosure_revenue,
                            full_disclosure_chain, full_disclosure_revenue, join_rate_at_length,
                            market_share_curve, optimal_price_disclosure,
                            optimal_price_full_disclosure, steady_state, tail_join_rate,
                            threshold_chain)
from qco.equilibrium import solve_lambda_homog
from qco.pricing import optimal_pricing


def test_join_rate_examples():
    assert join_rate_at_length(math.e, 1.3, 1.3, 0) == pytest.approx(0.5, rel=1e-15)
    assert np.allclose(join_rate_at_length(2.0, 1.0, 0.0, np.arange(10)), 2 / 3, rtol=1e-15)
    rates = join_rate_at_length(2.0, 1.0, 0.5, np.arange(60))
    assert np.all(np.diff(rates) < 0) and rates[-1] < 1e-10


@settings(max_examples=100, deadline=None)
@given(W=st.floats(0.01, 50), mu=st.floats(0.1, 5), c=st.floats(0.01, 5))
def test_threshold_zero_is_nondisclosure(W, mu, c):
    assert tail_join_rate(W, mu, c, 0) == pytest.approx(solve_lambda_homog(W, mu, c), abs=1e-12)


def test_zero_cost_tail():
    for k in (0, 1, 5):
        assert tail_join_rate(3.0, 2.0, 0.0, k) == pytest.approx(0.75, rel=1e-15)


def test_geometric_chain():
    ch = steady_state([], 1.0, 0.6)
    assert ch.P0 == pytest.approx(0.4, rel=1e-15)
    assert ch.throughput == pytest.approx(0.6, rel=1e-15)
    assert ch.prob(3) == pytest.approx(0.4 * 0.6**3, rel=1e-14)


def series_P0(W, mu, c, terms=400):
    # independent product-form sum in extended precision
    import mpmath as mp
    mp.mp.dps = 40
    total, prod = mp.mpf(1), mp.mpf(1)
    for l in range(terms):
        lam = mp.mpf(W) / (mp.e ** (mp.mpf(c) * (l + 1) / mu) + W)
        prod *= lam / mu
        total += prod
        if prod < mp.mpf(10) ** -30:
            break
    return float(1 / total)


def test_full_disclosure_series():
    ch = full_disclosure_chain(2.0, 1.0, 1.0)
    assert ch.P0 == pytest.approx(series_P0(2.0, 1.0, 1.0), rel=1e-13)
    res = ch.residuals()
    assert abs(res["flow_balance"]) <= 1e-9 and abs(res["normalization"]) <= 1e-9


def test_threshold_residuals(rng):
    for _ in range(30):
        W, mu, c = rng.uniform(0.1, 10), rng.uniform(0.2, 3), rng.uniform(0.01, 3)
        for k in (0, 1, 4, 20):
            res = threshold_chain(W, mu, c, k).residuals()
            assert abs(res["flow_balance"]) <= 1e-9 and abs(res["normalization"]) <= 1e-9


def test_threshold_chain_converges_to_full():
    curve = market_share_curve(3.0, 1.0, 0.5, 200)
    assert abs(curve.F[-1] - curve.F_inf) <= 1e-6


def test_ratio_limit():
    W, mu, c = 3.0, 1.0, 0.5
    curve = market_share_curve(W, mu, c, 61)
    ratio = curve.tail_rates[61] / curve.tail_rates[60]
    assert abs(ratio - math.exp(-c / mu)) <= 1e-4


def test_share_curve_monotone_when_cost_high():
    curve = market_share_curve(3.0, 1.0, 6.0, 50)
    assert curve.nondecreasing
    assert np.all(np.diff(curve.F) >= -1e-12)


def test_compare_verdicts():
    assert compare_rates(3.0, 0.8, 1.0)[0] == "disclosure"
    assert compare_rates(3.0, 6.0, 1.0)[0] == "nondisclosure"
    verdict, lam, lam_hat, _ = compare_rates(3.0, 1.0, 0.0)
    assert verdict == "tie" and lam == pytest.approx(0.75) and lam_hat == pytest.approx(0.75)


def test_compare_instance():
    inst = Instance((Product("a", 0.0, 0.0), Product("b", math.log(2), 0.0)), 1.0, 0.8)
    v = compare_disclosure(inst)
    assert v.verdict == "disclosure"
    assert v.inequality_holds
    assert v.revenue_disclosure == pytest.approx(0.0)


def test_full_disclosure_price_grid_oracle():
    res = optimal_price_full_disclosure([0.0], 1.0, 0.5)
    grid = np.linspace(0, 20, 10_001)
    vals = np.array([full_disclosure_revenue(p, [0.0], 1.0, 0.5) for p in grid])
    assert res.revenue >= vals.max() - 1e-12
    assert full_disclosure_revenue(0.0, [0.0], 1.0, 0.5) == 0
    assert full_disclosure_revenue(60.0, [0.0], 1.0, 0.5) < 1e-20


def test_threshold_zero_price_is_uniform_optimum():
    res = optimal_price_disclosure([0.2, 0.5], 1.1, 0.4, k=0)
    sol = optimal_pricing([0.2, 0.5], 1.1, 0.4)
    assert res.price == pytest.approx(sol.price_star, abs=1e-6)
    assert res.revenue == pytest.approx(sol.revenue_star, rel=1e-12)


def test_revenue_function_consistency():
    p = 1.3
    assert disclosure_revenue(p, [0.0], 1.0, 0.5, None) == pytest.approx(full_disclosure_revenue(p, [0.0], 1.0, 0.5))
    W = math.exp(-p)
    assert disclosure_revenue(p, [0.0], 1.0, 0.5, 0) == pytest.approx(p * solve_lambda_homog(W, 1.0, 0.5), rel=1e-12)
