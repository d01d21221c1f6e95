import numpy as np
import pytest

from qco.core import random_instance
from qco.disclosure import threshold_chain
from qco.sim import SimConfig, calibrate, disclosure_setup, fifo_setup, priority_setup, simulate


def test_mm1_sojourn():
    cfg = SimConfig("fifo", 1e6, lam=[0.5], mu=1.0, seed=11)
    rep = simulate(cfg, {"rates": [0.5], "sojourn": [2.0]})
    assert rep.events >= 1e6 * 0.9
    assert rep.passed, rep.checks
    assert rep.sojourn[0] == pytest.approx(2.0, rel=0.02)


def test_no_joins():
    cfg = SimConfig("fifo", 1e4, lam=[0.0], mu=1.0)
    rep = simulate(cfg, {"rates": [0.0], "sojourn": [1.0]})
    assert rep.passed
    assert rep.join_rates == [0.0]


def test_constant_rate_chain():
    cfg = SimConfig("disclosure", 3e5, mu=1.0, state_rates=[], tail_rate=0.6, seed=5)
    rep = simulate(cfg, {"probs": [0.4, 0.24], "throughput": 0.6})
    assert rep.passed, rep.checks
    assert rep.occupancy[0] == pytest.approx(0.4, abs=0.01)


def test_reproducible():
    inst = random_instance(np.random.default_rng(1), 3, mu=1.0, c=0.5)
    cfg, ref = fifo_setup(inst, 2e4, seed=9, replications=2)
    a, b = simulate(cfg, ref), simulate(cfg, ref)
    assert a.as_dict() == b.as_dict()
    assert a.batch_csv() == b.batch_csv()
    cfg2, _ = fifo_setup(inst, 2e4, seed=10, replications=2)
    assert simulate(cfg2, ref).as_dict() != a.as_dict()


def test_priority_classes():
    lam, mu = [0.2, 0.15, 0.25], [1.5, 1.0, 2.0]
    cfg, ref = priority_setup(lam, mu, [2, 0, 1], 4e5, seed=2)
    rep = simulate(cfg, ref)
    assert rep.passed, [c for c in rep.checks if not c.passed]


def test_threshold_chain_sim():
    cfg, ref = disclosure_setup(3.0, 1.0, 0.3, 3, 1e6, seed=4)
    rep = simulate(cfg, ref)
    assert rep.passed, [c for c in rep.checks if not c.passed]
    assert rep.throughput == pytest.approx(threshold_chain(3.0, 1.0, 0.3, 3).throughput, rel=0.01)


def test_calibrate_counts():
    cfg, ref = disclosure_setup(3.0, 1.0, 0.3, 2, 2e4, seed=100, n_probs=3)
    fails = calibrate(cfg, ref, runs=5)
    assert set(fails) >= {"P0", "P1", "P2", "throughput", "little"}
    assert all(0 <= v <= 5 for v in fails.values())


@pytest.mark.parametrize("kw", [
    dict(mode="nope", horizon=10),
    dict(mode="fifo", horizon=10, lam=[0.6, 0.5]),
    dict(mode="fifo", horizon=10, lam=[0.5], mu=0.4),
    dict(mode="fifo", horizon=10, lam=[0.5], warmup=20),
    dict(mode="priority", horizon=10, lam=[0.1, 0.1], order=[0, 0]),
    dict(mode="disclosure", horizon=10, state_rates=[1.5]),
])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)
