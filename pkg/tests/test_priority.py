import itertools

import numpy as np
import pytest

from qco.core import Instance, Product
from qco.pricing import optimal_pricing
from qco.priority import (InfeasibleLoad, best_order_by_enumeration, cmu_order, objective,
                          objective_gradient, priority_pricing_general, priority_pricing_special,
                          priority_waits, total_wait_cost, wait_cost_gradient)


def test_cmu_examples():
    assert cmu_order([2, 1], [1, 1]) == [0, 1]
    assert cmu_order([1, 1, 1], [2, 2, 2]) == [0, 1, 2]
    assert cmu_order([1, 3, 2], [1, 1, 1]) == [1, 2, 0]


def test_single_class_is_mm1():
    assert priority_waits([0], [0.3], [1.2])[0] == pytest.approx(1 / 0.9, rel=1e-14)
    assert total_wait_cost([0], [0.3], [1.2], [0.7]) == pytest.approx(0.7 * 0.3 / 0.9, rel=1e-14)


def test_two_class_hand_values():
    # preemptive-resume: the top class sees an M/M/1 with its own load only
    w = priority_waits([0, 1], [0.2, 0.3], [1.0, 1.0])
    assert w[0] == pytest.approx(1.25, abs=1e-15)
    assert w[1] == pytest.approx(2.5, abs=1e-14)


def test_waits_indexed_by_product():
    w = priority_waits([1, 0], [0.2, 0.3], [1.0, 1.0])
    assert w[1] == pytest.approx(1 / 0.7, rel=1e-14)


def test_permutation_invariance(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        lam = rng.dirichlet(np.ones(n)) * rng.uniform(0.1, 0.9)
        mu, c = 1.0, 0.7
        ref = c * lam.sum() / (mu - lam.sum())
        for perm in itertools.permutations(range(n)):
            assert total_wait_cost(perm, lam, [mu] * n, [c] * n) == pytest.approx(ref, rel=1e-10)


def test_cmu_beats_permutations(rng):
    for _ in range(10):
        n = 4
        mu = rng.uniform(0.5, 2, n)
        c = rng.uniform(0.1, 2, n)
        lam = rng.dirichlet(np.ones(n))
        lam *= 0.8 / np.sum(lam / mu)
        inst = Instance(tuple(Product(f"x{i}", 0, 1, float(mu[i]), float(c[i])) for i in range(n)), 0.5)
        best, cost = best_order_by_enumeration(inst, lam)
        assert total_wait_cost(cmu_order(c, mu), lam, mu, c) <= cost * (1 + 1e-12)


def test_overload_raises():
    with pytest.raises(InfeasibleLoad):
        priority_waits([0, 1], [0.6, 0.6], [1, 1])


def test_gradients_against_finite_differences(rng):
    n = 4
    mu, c = rng.uniform(0.8, 2, n), rng.uniform(0.1, 1, n)
    r = rng.uniform(0, 1, n)
    lam = np.full(n, 0.08)
    order = cmu_order(c, mu)
    h = 1e-6
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (total_wait_cost(order, lam + e, mu, c) - total_wait_cost(order, lam - e, mu, c)) / (2 * h)
        assert wait_cost_gradient(order, lam, mu, c)[i] == pytest.approx(fd, rel=1e-6)
        fd = (objective(lam + e, r, order, mu, c) - objective(lam - e, r, order, mu, c)) / (2 * h)
        assert objective_gradient(lam, r, order, mu, c)[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_special_single_class():
    plan = priority_pricing_special([0.4], 1.5, 0.6)
    sol = optimal_pricing([0.4], 1.5, 0.6)
    assert plan.lam[0] == pytest.approx(sol.lambda_star, rel=1e-14)
    assert plan.prices[0] == pytest.approx(sol.price_star, rel=1e-12)


def test_special_prices_decrease_with_position(rng):
    for _ in range(20):
        n = int(rng.integers(2, 7))
        plan = priority_pricing_special(rng.uniform(0, 2, n), float(rng.uniform(0.4, 3)), float(rng.uniform(0.05, 2)))
        p = plan.prices[plan.order]
        assert np.all(np.diff(p) < -1e-9)


def test_special_revenue_matches_uniform():
    # same rates, same total waiting cost, so the same revenue as uniform pricing
    plan = priority_pricing_special([0.0, 0.0], 1.0, 0.5)
    sol = optimal_pricing([0.0, 0.0], 1.0, 0.5)
    assert plan.objective == pytest.approx(sol.revenue_star, rel=1e-10)
    assert plan.prices[0] > plan.prices[1]


def test_general_reduces_to_special(rng):
    r = rng.uniform(0, 1.5, 3)
    mu, c = 1.2, 0.5
    inst = Instance(tuple(Product(f"x{i}", float(r[i]), None, mu, c) for i in range(3)), c)
    gen = priority_pricing_general(inst)
    spe = priority_pricing_special(r, mu, c, gen.order)
    assert np.allclose(gen.lam, spe.lam, atol=1e-6)
    assert np.allclose(gen.prices, spe.prices, atol=1e-6)
    assert gen.gradient_norm <= 1e-7


def test_general_hetero_stationary(rng):
    n = 4
    inst = Instance(tuple(Product(f"x{i}", float(rng.uniform(0, 1.5)), None, float(rng.uniform(0.6, 2)),
                                  float(rng.uniform(0.1, 1))) for i in range(n)), 0.5)
    plan = priority_pricing_general(inst, seed=3)
    assert plan.gradient_norm <= 1e-7
    assert plan.objective == pytest.approx(float(np.dot(plan.prices, plan.lam)), rel=1e-9)
    again = priority_pricing_general(inst, seed=3)
    assert np.array_equal(plan.prices, again.prices)
