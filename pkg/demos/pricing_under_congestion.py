"""How a single price responds to service capacity and waiting costs.

Run: python demos/pricing_under_congestion.py
"""

import numpy as np

from qco import optimal_pricing
from qco.pricing import price_threshold_c, price_thresholds_mu, statics_c, statics_mu

r = [0.0, 0.4, 0.9]

print("Optimal uniform price as the server gets faster (c = 0.25)")
rep = statics_mu(r, 0.25, np.linspace(0.2, 4.0, 20))
for mu, lam, p, rev in rep.rows():
    print(f"  mu={mu:5.2f}  lambda*={lam:.4f}  p*={p:.4f}  R*={rev:.4f}")
lo, hi = price_thresholds_mu(r, 0.25)
print(f"The price falls with mu only between mu={lo:.3f} and mu={hi:.3f}; it rises elsewhere.")
print("Shape:", ", ".join(f"{a:.2f}-{b:.2f} {kind}" for a, b, kind in rep.segments))

print("\nA slow server (mu = 0.6): the price first rises, then falls, with the waiting cost")
th = price_threshold_c([0.0], 0.6)
print(f"  turning point c3 = {th['c3']:.4f}")
rep = statics_c([0.0], 0.6, np.linspace(0.02, 2.0, 12))
for c, lam, p, rev in rep.rows():
    print(f"  c={c:4.2f}  p*={p:.4f}  R*={rev:.4f}")
print("  revenue direction in c:", rep.flags["revenue_direction"])

print("\nA fast server (mu = 2): higher waiting costs always push the price down")
for c in (0.0, 0.5, 1.0, 2.0):
    sol = optimal_pricing(r, 2.0, c)
    print(f"  c={c:.1f}  p*={sol.price_star:.4f}  shares={np.round(sol.lambda_i_star / sol.lambda_star, 3)}")
