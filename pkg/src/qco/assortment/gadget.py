"""Reduction from Partition to the assortment decision problem.

Partition weights omega_1..omega_n (summing to 2) become products priced at
p1 with attraction omega_i; one extra product with attraction omega_x and a
higher price p2 is added. Parameters are chosen so that the revenue, as a
function of the total attraction of the included Partition items, peaks
exactly when that total equals 1. Hence an assortment reaching the target T
exists iff the Partition instance is a yes-instance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import Instance, Product
from ..equilibrium import solve_lambda_homog

LAMBDA_MAX = 0.9
MU = 0.95
C = 0.05
P1 = 1.0


@dataclass(frozen=True)
class GadgetInstance:
    omegas: tuple[float, ...]
    lambda_max: float
    mu: float
    c: float
    omega_extra: float
    p1: float
    p2: float
    target: float
    h_inv: float

    def slope_factor(self, x):
        """(c (1 - x) / (mu - x)^2 + 1) exp(-c / (mu - x))."""
        d = self.mu - np.asarray(x, dtype=float)
        return (self.c * (1 - np.asarray(x)) / d**2 + 1.0) * np.exp(-self.c / d)

    def G(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.p1 * lam + (self.p2 - self.p1) * self.omega_extra * (1 - lam) * np.exp(-self.c / (self.mu - lam))

    def dG(self, x):
        return self.p1 - self.slope_factor(x) * self.omega_extra * (self.p2 - self.p1)

    def residuals(self) -> dict:
        mu, c, lm = self.mu, self.c, self.lambda_max
        first = self.p1 - float(self.slope_factor(self.h_inv)) * self.omega_extra * (self.p2 - self.p1)
        second = (2 * (1 - mu) * mu - c) / (2 * (1 - mu - c / 2)) - lm
        third = self.omega_extra + 2 - lm / (1 - lm) * math.exp(c / (mu - lm))
        return {"stationarity": first, "curvature_margin": second, "capacity": third}

    def as_dict(self) -> dict:
        out = asdict(self)
        out["omegas"] = list(self.omegas)
        out["residuals"] = self.residuals()
        return out


def gadget_build(omegas: Sequence[float], lambda_max: float = LAMBDA_MAX, mu: float = MU,
                 c: float = C, p1: float = P1) -> tuple[GadgetInstance, Instance]:
    omegas = tuple(float(x) for x in omegas)
    if not omegas or any(not x > 0 for x in omegas):
        raise ValueError("partition weights must be positive")
    if abs(sum(omegas) - 2.0) > 1e-9:
        raise ValueError(f"partition weights must sum to 2, got {sum(omegas)!r}")
    # total attraction 2 + omega_x must push the purchase rate to lambda_max
    omega_x = lambda_max / (1 - lambda_max) * math.exp(c / (mu - lambda_max)) - 2.0
    h = solve_lambda_homog(omega_x + 1.0, mu, c)
    d = mu - h
    factor = (c * (1 - h) / d**2 + 1.0) * math.exp(-c / d)
    p2 = p1 + p1 / (factor * omega_x)
    g = GadgetInstance(omegas, lambda_max, mu, c, omega_x, p1, p2, 0.0, h)
    g = GadgetInstance(omegas, lambda_max, mu, c, omega_x, p1, p2, float(g.G(h)), h)
    prods = [Product(f"w{k}", math.log(x) + p1, p1) for k, x in enumerate(omegas)]
    prods.append(Product("extra", math.log(omega_x) + p2, p2))
    return g, Instance(tuple(prods), c, mu)


@dataclass
class GadgetReport:
    ok: bool
    argmax: float
    h_inv: float
    resolution: float
    stationarity: float
    slope_monotone: bool
    sign_changes: int
    residuals: dict
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def gadget_verify(g: GadgetInstance, resolution: float = 1e-4, tol: float = 1e-4) -> GadgetReport:
    """Check on a grid that G peaks at h^{-1}(1) with a single sign change of G'."""
    lo = solve_lambda_homog(g.omega_extra, g.mu, g.c)
    grid = np.arange(lo, g.lambda_max + 0.5 * resolution, resolution)
    grid = grid[grid <= g.lambda_max + 1e-15]
    vals = g.G(grid)
    k = int(np.argmax(vals))
    argmax = float(grid[k])
    slope = -g.slope_factor(grid)
    deriv = g.dG(grid)
    signs = np.sign(deriv[deriv != 0])
    flips = int(np.count_nonzero(np.diff(signs)))
    stat = float(g.dG(g.h_inv))
    failures = []
    if abs(argmax - g.h_inv) > resolution:
        failures.append({"check": "argmax", "point": argmax, "expected": g.h_inv})
    if abs(stat) > tol:
        failures.append({"check": "stationarity", "point": g.h_inv, "value": stat})
    steps = np.diff(slope)
    if np.any(steps >= 0):
        bad = int(np.argmax(steps >= 0))
        failures.append({"check": "slope_monotone", "point": float(grid[bad + 1])})
    if flips != 1:
        failures.append({"check": "sign_changes", "count": flips})
    res = g.residuals()
    for key in ("stationarity", "capacity"):
        if abs(res[key]) > 1e-6:
            failures.append({"check": f"residual_{key}", "value": res[key]})
    if res["curvature_margin"] < -1e-12:
        failures.append({"check": "residual_curvature_margin", "value": res["curvature_margin"]})
    return GadgetReport(not failures, argmax, g.h_inv, resolution, stat, not np.any(steps >= 0),
                        flips, res, failures)


def has_partition(omegas: Sequence[float], tol: float = 1e-9) -> bool:
    n = len(omegas)
    return any(abs(sum(s) - 1.0) <= tol
               for k in range(1, n + 1) for s in itertools.combinations(omegas, k))


def partition_equivalence(families: Optional[Sequence[Sequence[float]]] = None, size: int = 4,
                          step: float = 0.1) -> list[dict]:
    """Compare Partition answers with the assortment target test, instance by instance.

    By default every multiset of ``size`` positive multiples of ``step`` summing
    to 2 is checked.
    """
    from .base import brute_force

    if families is None:
        units = round(2.0 / step)
        families = [tuple(k * step for k in combo)
                    for combo in itertools.combinations_with_replacement(range(1, units), size)
                    if sum(combo) == units]
    out = []
    for omegas in families:
        g, inst = gadget_build(omegas)
        best = brute_force(inst)
        out.append({
            "omegas": list(omegas),
            "partition": has_partition(omegas),
            "assortment": best.revenue >= g.target - 1e-9,
            "best_revenue": best.revenue,
            "target": g.target,
        })
    return out
