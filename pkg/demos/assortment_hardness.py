"""Picking which products to offer: easy cases, hard cases, and approximation.

Run: python demos/assortment_hardness.py
"""

import numpy as np

from qco.assortment import (brute_force, fptas_hetero, fptas_homog, gadget_build, gadget_verify,
                            optimality_condition, partition_equivalence, revenue_ordered)
from qco.core import random_instance

rng = np.random.default_rng(42)

print("1. When the server is fast enough, offering the top-priced products is optimal.")
inst = random_instance(rng, 10, mu=1.4, c=0.3)
h, o = revenue_ordered(inst), brute_force(inst)
print(f"   revenue-ordered {h.revenue:.6f} vs exhaustive {o.revenue:.6f}; condition holds: "
      f"{optimality_condition(1.4, 0.3)[0]}")

print("\n2. A slow server with cheap waiting can break that rule, but never by more than a factor 3.")
worst = 1.0
for _ in range(200):
    inst = random_instance(rng, int(rng.integers(2, 11)), mu=0.95, c=0.05)
    worst = min(worst, revenue_ordered(inst).revenue / brute_force(inst).revenue)
print(f"   worst revenue-ordered / optimal over 200 random instances: {worst:.6f}")
_, inst = gadget_build([0.3, 0.4, 0.6, 0.7])
h, o = revenue_ordered(inst), brute_force(inst)
print(f"   on a gadget instance the price prefix misses the optimum: {h.revenue:.10f} < {o.revenue:.10f}")

print("\n3. The hardness gadget: a Partition instance hidden in an assortment problem.")
g, inst = gadget_build([0.5, 0.5, 0.5, 0.5])
rep = gadget_verify(g)
print(f"   extra attraction {g.omega_extra:.4f}, peak at lambda={g.h_inv:.5f}, p2={g.p2:.5f}, "
      f"verified={rep.ok}")
best = brute_force(inst)
print(f"   target {g.target:.6f}; best assortment {[inst.products[i].id for i in best.subset]} "
      f"reaches {best.revenue:.6f}")
rows = partition_equivalence()
print(f"   {len(rows)} four-item weight lists: Partition and assortment answers agree on "
      f"{sum(r['partition'] == r['assortment'] for r in rows)}")

print("\n4. Approximation schemes trade accuracy for time.")
inst = random_instance(rng, 10, mu=0.8, c=0.2)
opt = brute_force(inst).revenue
for eps in (0.3, 0.2, 0.1):
    sol = fptas_homog(inst, eps)
    print(f"   eps={eps}: ratio {sol.revenue / opt:.4f} (guarantee {1 - 2 * eps:.1f}), "
          f"states per grid pair {sol.stats['states_per_pair']}")
inst = random_instance(rng, 9, hetero=True, c=0.3, mu_range=(0.8, 1.2))
opt = brute_force(inst, capacity=3).revenue
sol = fptas_hetero(inst, 0.15, 3)
print(f"   per-product rates, at most 3 products: ratio {sol.revenue / opt:.4f}, picked {len(sol.subset)}")
