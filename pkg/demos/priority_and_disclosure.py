"""Two service-design levers: priority classes and telling customers the queue length.

Run: python demos/priority_and_disclosure.py
"""

import numpy as np

from qco.core import Instance, Product
from qco.disclosure import compare_rates, market_share_curve, optimal_price_disclosure
from qco.pricing import optimal_pricing
from qco.priority import priority_pricing_general, priority_pricing_special
from qco.sim import disclosure_setup, priority_setup, simulate

print("Priority pricing with identical classes: the same revenue, split differently.")
plan = priority_pricing_special([0.5, 0.5, 0.5], 1.0, 0.5)
base = optimal_pricing([0.5, 0.5, 0.5], 1.0, 0.5)
print(f"  uniform price {base.price_star:.4f}; priority prices {np.round(plan.prices, 4)}")
print(f"  revenue {plan.objective:.6f} vs {base.revenue_star:.6f}")

print("\nClasses with their own rates are served by the c-mu rule and priced numerically.")
inst = Instance((Product("express", 1.2, None, 2.0, 1.0), Product("standard", 1.0, None, 1.0, 0.4),
                 Product("bulk", 0.6, None, 0.7, 0.1)), 0.5)
plan = priority_pricing_general(inst)
for i in plan.order:
    print(f"  {inst.products[i].id:9s} rate {plan.lam[i]:.4f}  price {plan.prices[i]:.4f}  "
          f"time in system {plan.wait_tilde[i]:.3f}")
rep = simulate(*priority_setup(plan.lam, inst.service_rates, plan.order, 1e6, seed=1))
print(f"  simulated times {np.round(rep.sojourn, 3)}; checks passed: {rep.passed}")

print("\nShould the firm show customers the queue length?")
for mu in (0.8, 1.5, 3.0, 6.0):
    verdict, lam, lam_hat, _ = compare_rates(3.0, mu, 1.0)
    print(f"  mu={mu}: silent {lam:.4f}, full disclosure {lam_hat:.4f} -> {verdict}")

curve = market_share_curve(3.0, 1.0, 6.0, 12)
print("  with very impatient customers, revealing more always helps:",
      np.round(curve.F, 4), "-> full", round(curve.F_inf, 4))

for k in (0, 2, None):
    res = optimal_price_disclosure([0.0, 0.5], 1.0, 0.5, k)
    label = "full" if k is None else f"k={k}"
    print(f"  {label:5s} best price {res.price:.4f}, revenue {res.revenue:.4f}")

cfg, ref = disclosure_setup(3.0, 1.0, 0.3, 3, 1e6, seed=7)
rep = simulate(cfg, ref)
print(f"  threshold-3 chain: simulated P0 {rep.occupancy[0]:.4f} vs {ref['probs'][0]:.4f}, "
      f"throughput {rep.throughput:.4f} vs {ref['throughput']:.4f}")
