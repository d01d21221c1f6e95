import itertools

import numpy as np
import pytest

from qco.core import Instance, Product, random_instance
from qco.assortment import (brute_force, fptas_hetero, fptas_homog, optimality_condition,
                            revenue_ordered, subset_revenues)
from qco.assortment.fptas import bucket_count, grid_bounds
from qco.equilibrium import equilibrium


def enumerate_best(inst, capacity=None):
    # independent 2^n oracle through the scalar equilibrium solver
    best = 0.0
    for k in range(1, inst.n + 1):
        if capacity is not None and k > capacity:
            break
        for s in itertools.combinations(range(inst.n), k):
            best = max(best, equilibrium(inst, s).revenue)
    return best


def test_single_product():
    inst = Instance((Product("a", 0.2, 1.0),), 0.3, 1.0)
    assert brute_force(inst).subset == (0,)
    assert fptas_homog(inst, 0.3).subset == (0,)
    assert revenue_ordered(inst).subset == (0,)


def test_identical_pair_resolved_by_evaluation():
    inst = Instance((Product("a", 1, 1), Product("b", 1, 1)), 0.2, 0.9)
    sol = brute_force(inst)
    revs = {s: equilibrium(inst, s).revenue for s in [(0,), (1,), (0, 1)]}
    assert sol.revenue == pytest.approx(max(revs.values()), rel=1e-12)
    assert sol.subset == max(revs, key=lambda s: (revs[s], -len(s)))


def test_regression_fixture():
    inst = random_instance(np.random.default_rng(7), 10)
    sol = brute_force(inst)
    assert sol.subset == (4, 5, 6, 7, 8, 9)
    assert sol.revenue == pytest.approx(0.6028142902422015, rel=1e-12)


def test_vectorized_revenues_match_scalar(rng):
    for hetero in (False, True):
        inst = random_instance(rng, 6, hetero=hetero)
        masks = np.arange(1, 64)
        revs = subset_revenues(inst, masks)
        for m, v in zip(masks, revs):
            s = [i for i in range(6) if m >> i & 1]
            assert v == pytest.approx(equilibrium(inst, s).revenue, rel=1e-10)


def test_brute_matches_independent_oracle(rng):
    for hetero in (False, True):
        inst = random_instance(rng, 7, hetero=hetero)
        assert brute_force(inst).revenue == pytest.approx(enumerate_best(inst), rel=1e-10)
        assert brute_force(inst, capacity=2).revenue == pytest.approx(enumerate_best(inst, 2), rel=1e-10)


def test_optimality_condition_examples():
    assert optimality_condition(1.2, 0.0)[0]
    ok, cert = optimality_condition(0.5, 0.5)
    assert ok and cert["s_at_0"] == pytest.approx(0.0, abs=1e-15)
    ok, cert = optimality_condition(0.95, 0.05)
    assert not ok and cert["s_at_0"] == pytest.approx(-0.045, abs=1e-12)


@pytest.mark.parametrize("mu,c", [(1.5, 0.4), (0.5, 0.6)])
def test_revenue_order_exact_under_conditions(rng, mu, c):
    for n in range(1, 11):
        inst = random_instance(rng, n, mu=mu, c=c)
        sol = revenue_ordered(inst)
        assert sol.guarantee == 1
        assert sol.revenue == pytest.approx(brute_force(inst).revenue, rel=1e-9)


def test_revenue_order_third_bound(rng):
    for n in range(2, 11):
        inst = random_instance(rng, n, mu=0.95, c=0.05)
        sol = revenue_ordered(inst)
        assert sol.guarantee == pytest.approx(1 / 3)
        assert sol.revenue >= brute_force(inst).revenue / 3 - 1e-9


def test_revenue_order_is_prefix(rng):
    inst = random_instance(rng, 8)
    sol = revenue_ordered(inst)
    p = inst.prices
    inside = p[list(sol.subset)]
    outside = np.delete(p, list(sol.subset))
    assert outside.size == 0 or inside.min() >= outside.max()


def test_grid_sizes():
    k_max, m_max = grid_bounds(10, 0.1)
    assert (k_max, m_max) == (110, 90)
    assert bucket_count(10, 0.1, 1.0, 2.0) >= 1


def test_fptas_equal_prices(rng):
    prods = tuple(Product(f"x{i}", float(r), 1.3) for i, r in enumerate(rng.uniform(0, 1, 8)))
    inst = Instance(prods, 0.3, 0.8)
    opt = brute_force(inst).revenue
    for eps in (0.1, 0.25):
        assert fptas_homog(inst, eps).revenue >= (1 - 2 * eps) * opt


@pytest.mark.parametrize("eps", [0.1, 0.2])
def test_fptas_homog_guarantee(rng, eps):
    for _ in range(10):
        inst = random_instance(rng, 8, mu=float(rng.uniform(0.5, 1.0)), c=float(rng.uniform(0, 0.3)))
        sol = fptas_homog(inst, eps)
        assert sol.guarantee == pytest.approx(1 - 2 * eps)
        assert sol.revenue >= (1 - 2 * eps) * brute_force(inst).revenue - 1e-12
        assert sol.stats["states_per_pair"] > 0


def test_fptas_hetero_single_capacity(rng):
    inst = random_instance(rng, 7, hetero=True, mu_range=(0.8, 1.2))
    sol = fptas_hetero(inst, 0.2, capacity=1)
    singles = [equilibrium(inst, [i]).revenue for i in range(inst.n)]
    assert sol.revenue == pytest.approx(max(singles), rel=1e-12)


def test_fptas_hetero_equal_rates_vs_homog(rng):
    base = random_instance(rng, 7, mu=0.9, c=0.2)
    het = Instance(tuple(Product(q.id, q.r, q.p, 0.9) for q in base.products), 0.2)
    eps, K = 0.15, 3
    capped = brute_force(base, capacity=K).revenue
    assert fptas_hetero(het, eps, K).revenue >= (1 - 2 * eps) * capped - 1e-12


def test_fptas_hetero_guarantee():
    rng = np.random.default_rng(9)
    inst = random_instance(rng, 9, hetero=True, mu_range=(0.8, 1.2))
    sol = fptas_hetero(inst, 0.15, 4)
    assert len(sol.subset) <= 4
    assert sol.revenue >= 0.7 * brute_force(inst, capacity=4).revenue - 1e-12


def test_bad_epsilon(rng):
    inst = random_instance(rng, 3)
    for eps in (0, 1, -0.1):
        with pytest.raises(ValueError):
            fptas_homog(inst, eps)
