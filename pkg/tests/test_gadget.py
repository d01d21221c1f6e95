import dataclasses
import itertools
import math

import pytest

from qco.assortment import gadget_build, gadget_verify, partition_equivalence
from qco.assortment.gadget import has_partition
from qco.core import load_instance, save_instance
from qco.equilibrium import equilibrium, solve_lambda_homog


def test_constants_two_items():
    g, inst = gadget_build([1.0, 1.0])
    # omega_x from lambda_max/(1-lambda_max) e^{c/(mu-lambda_max)} - 2 with 0.9, 0.95, 0.05
    assert g.omega_extra == pytest.approx(9 * math.e - 2, rel=1e-14)
    assert g.omega_extra == pytest.approx(22.4646, abs=1e-4)
    assert g.h_inv == pytest.approx(0.8986, abs=1e-4)
    assert g.h_inv == pytest.approx(0.899, abs=1e-3)
    assert g.p2 == pytest.approx(1.04, abs=0.01)
    res = g.residuals()
    assert abs(res["stationarity"]) <= 1e-6
    assert abs(res["capacity"]) <= 1e-6
    assert res["curvature_margin"] >= 0


def test_round_trip(tmp_path):
    _, inst = gadget_build([0.3, 0.7, 0.4, 0.6])
    f = tmp_path / "g.json"
    save_instance(inst, f)
    assert load_instance(f) == inst


def test_perfect_partition_blocks():
    g, inst = gadget_build([0.5] * 4)
    extra = inst.n - 1
    for k in range(5):
        for block in itertools.combinations(range(4), k):
            rev = equilibrium(inst, list(block) + [extra]).revenue
            if k == 2:
                assert rev == pytest.approx(g.target, rel=1e-12)
            else:
                assert rev < g.target - 1e-9


def test_target_is_G_at_peak():
    g, inst = gadget_build([0.5] * 4)
    lam = solve_lambda_homog(g.omega_extra + 1, g.mu, g.c)
    assert g.target == pytest.approx(float(g.G(lam)), rel=1e-14)


def test_verify_and_negative_control():
    g, _ = gadget_build([1.0, 1.0])
    rep = gadget_verify(g, 1e-4)
    assert rep.ok, rep.failures
    assert abs(rep.argmax - 0.8986) <= 2e-4
    assert rep.sign_changes == 1
    bad = dataclasses.replace(g, p2=g.p2 + 0.05)
    rep = gadget_verify(bad, 1e-4)
    assert not rep.ok
    assert any(f["check"] in ("stationarity", "argmax") for f in rep.failures)


def test_rejects_bad_weights():
    with pytest.raises(ValueError):
        gadget_build([1.0, 0.5])
    with pytest.raises(ValueError):
        gadget_build([2.5, -0.5])


def test_has_partition():
    assert has_partition([0.5, 0.5, 0.5, 0.5])
    assert not has_partition([0.3, 0.3, 0.3, 1.1])


def test_equivalence_on_small_families():
    rows = partition_equivalence([(0.3, 0.7, 0.5, 0.5), (0.3, 0.3, 0.3, 1.1), (0.1, 0.2, 0.4, 1.3)])
    assert [r["partition"] for r in rows] == [True, False, False]
    assert all(r["partition"] == r["assortment"] for r in rows)


def test_revenue_order_strictly_suboptimal_on_gadget():
    from qco.assortment import brute_force, revenue_ordered
    _, inst = gadget_build([0.3, 0.4, 0.6, 0.7])
    h, o = revenue_ordered(inst), brute_force(inst)
    assert h.revenue < o.revenue - 1e-12
    assert h.revenue >= o.revenue / 3
