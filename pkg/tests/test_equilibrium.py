import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from qco.core import Aggregates, Instance, Product, aggregates, random_instance
from qco.equilibrium import (consumer_surplus, equilibrium, hetero_residual, homog_residual,
                             solve_lambda_hetero, solve_lambda_hetero_many, solve_lambda_homog,
                             solve_lambda_homog_many)


def bisect(f, lo, hi, iters=200):
    # plain reference bisection for a decreasing f
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_homog_examples():
    assert solve_lambda_homog(1, 2, 0) == 0.5
    assert solve_lambda_homog(3, 1e6, 1) == pytest.approx(0.75, abs=1e-5)
    W = 0.9 / 0.1 * math.exp(0.05 / 0.05)  # lambda_max/(1-lambda_max) e^{c/(mu-lambda_max)}
    assert W - 2 == pytest.approx(22.4645, abs=1e-3)
    lam = solve_lambda_homog(W - 2 + 1, 0.95, 0.05)
    assert lam == pytest.approx(0.8986322, abs=1e-6)
    assert lam == pytest.approx(0.899, abs=1e-3)


def test_homog_zero_weight():
    assert solve_lambda_homog(0, 1, 1) == 0


def test_hetero_examples():
    agg = Aggregates((0, 1), 2.0, 1.5, 1.25, 2.0)
    assert solve_lambda_hetero(agg, 0) == pytest.approx(2 / 3, abs=1e-15)
    lam = solve_lambda_hetero(agg, 0.3)
    ref = bisect(lambda x: hetero_residual(x, agg, 0.3), 1e-15, min(1, agg.W / agg.A) * (1 - 1e-13))
    assert lam == pytest.approx(ref, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(W=st.floats(0.01, 50), mu=st.floats(0.05, 5), c=st.floats(0.001, 5))
def test_hetero_equal_rates_matches_homog(W, mu, c):
    # hetero aggregates carry the own-service discount exp(-c/mu)
    Weff = W * math.exp(-c / mu)
    agg = Aggregates((0,), Weff, Weff / mu, Weff / mu**2, Weff)
    assert solve_lambda_hetero(agg, c) == pytest.approx(solve_lambda_homog(W, mu, c), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(W=st.floats(1e-3, 1e3), mu=st.floats(0.01, 10), c=st.floats(1e-3, 10))
def test_homog_residual_and_bounds(W, mu, c):
    # keep the root above the 1e-300 search floor
    assume(c / mu < 500)
    lam = solve_lambda_homog(W, mu, c)
    assert 0 < lam < min(1, mu)
    assert abs(homog_residual(lam, W, mu, c)) <= 1e-9 * max(1, abs(c / (mu - lam)))


@settings(max_examples=50, deadline=None)
@given(W1=st.floats(0.01, 10), dW=st.floats(0.01, 10), mu=st.floats(0.1, 3), c=st.floats(0.01, 3))
def test_homog_monotone(W1, dW, mu, c):
    # more attraction -> more purchases; more congestion cost -> fewer
    assert solve_lambda_homog(W1 + dW, mu, c) >= solve_lambda_homog(W1, mu, c)
    assert solve_lambda_homog(W1, mu, c + 0.1) <= solve_lambda_homog(W1, mu, c)


def test_vectorized_agree(rng):
    W = rng.uniform(0.01, 20, 300)
    mu, c = 0.8, 0.4
    many = solve_lambda_homog_many(W, mu, c)
    assert np.allclose(many, [solve_lambda_homog(w, mu, c) for w in W], atol=1e-13, rtol=0)
    A = W * rng.uniform(0.5, 2, 300)
    B = A * rng.uniform(0.5, 2, 300)
    many = solve_lambda_hetero_many(W, A, B, c)
    one = [solve_lambda_hetero(Aggregates((), w, a, b, 0), c) for w, a, b in zip(W, A, B)]
    assert np.allclose(many, one, atol=1e-12, rtol=0)


def test_equilibrium_empty_and_single():
    inst = Instance((Product("a", 0.3, 1.1),), 0.0, 2.0)
    eq = equilibrium(inst, [])
    assert eq.lam == 0 and eq.revenue == 0 and eq.consumer_surplus == 0
    w = math.exp(0.3 - 1.1)
    assert equilibrium(inst).revenue == pytest.approx(1.1 * w / (1 + w), rel=1e-14)


def test_equilibrium_revenue_identity(rng):
    for hetero in (False, True):
        inst = random_instance(rng, 5, hetero=hetero)
        eq = equilibrium(inst)
        p = inst.prices
        assert eq.revenue == pytest.approx(float(np.dot(eq.lam_i, p)), rel=1e-10)
        assert eq.lam_i.sum() == pytest.approx(eq.lam, rel=1e-12)
        # shares follow the logit weights (within a service class)
        w = inst.weights * (np.exp(-inst.c / inst.service_rates) if hetero else 1)
        assert np.allclose(eq.lam_i / eq.lam, w / w.sum(), rtol=1e-12)


def test_consumer_surplus():
    assert consumer_surplus(0) == 0
    assert consumer_surplus(1 - 1 / math.e) == pytest.approx(1, rel=1e-15)
    assert consumer_surplus(0.5) == pytest.approx(0.693147, abs=1e-6)
    with pytest.raises(ValueError):
        consumer_surplus(1.0)


def test_unstable_without_cost():
    with pytest.raises(ValueError):
        solve_lambda_homog(10, 0.5, 0)


def test_subset_and_modes(rng):
    inst = random_instance(rng, 6, hetero=True)
    eq = equilibrium(inst, [4, 1])
    assert eq.subset == (1, 4)
    assert eq.lam_i[0] == 0 and eq.lam_i[1] > 0
    agg = aggregates(inst, [1, 4], own_service=True)
    assert eq.lam == pytest.approx(solve_lambda_hetero(agg, inst.c), rel=1e-14)
