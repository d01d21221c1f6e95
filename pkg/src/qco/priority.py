"""Preemptive-resume priority classes: waiting times, the c-mu rule and pricing.

Positions are 0-based here; ``order[0]`` is the highest-priority class. All
per-class arrays (rates, waits, prices) are indexed by product, not by
position.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Instance
from .pricing import optimal_pricing

LOAD_CAP = 1.0 - 1e-9
GRAD_TOL = 1e-7


class InfeasibleLoad(ValueError):
    pass


def cmu_order(c: Sequence[float], mu: Sequence[float]) -> list[int]:
    """Classes by decreasing c_i * mu_i, ties broken by index."""
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if c.shape != mu.shape or np.any(np.isnan(c)) or np.any(np.isnan(mu)):
        raise ValueError("need c and mu for every class")
    idx = c * mu
    return sorted(range(idx.size), key=lambda i: (-idx[i], i))


def _prefix(order, lam, mu):
    lam = np.asarray(lam, dtype=float)[list(order)]
    mu = np.asarray(mu, dtype=float)[list(order)]
    sigma = np.cumsum(lam / mu)
    if np.any(sigma >= 1):
        k = int(np.argmax(sigma >= 1))
        raise InfeasibleLoad(f"cumulative load {sigma[k]:.6g} >= 1 at priority position {k}")
    before = np.concatenate(([0.0], sigma[:-1]))
    S = np.cumsum(lam / mu**2)
    return lam, mu, sigma, before, S


def priority_waits(order: Sequence[int], lam: Sequence[float], mu: Sequence[float]) -> np.ndarray:
    """Expected system time of each class under preemptive-resume priority."""
    lam_o, mu_o, sigma, before, S = _prefix(order, lam, mu)
    t = S / ((1 - sigma) * (1 - before)) + 1.0 / (mu_o * (1 - before))
    out = np.empty(len(order))
    out[list(order)] = t
    return out


def total_wait_cost(order, lam, mu, c) -> float:
    waits = priority_waits(order, lam, mu)
    return float(np.sum(np.asarray(c, dtype=float) * np.asarray(lam, dtype=float) * waits))


def wait_cost_gradient(order, lam, mu, c) -> np.ndarray:
    """d/d lambda_m of the total waiting cost, indexed by product."""
    order = list(order)
    lam_o, mu_o, sigma, before, S = _prefix(order, lam, mu)
    c_o = np.asarray(c, dtype=float)[order]
    u, v = 1 / (1 - sigma), 1 / (1 - before)
    T = S * u * v + v / mu_o
    a, b = 1 / mu_o, 1 / mu_o**2
    n = len(order)
    grad = c_o * T
    for k in range(n):
        ck = c_o[k] * lam_o[k]
        for m in range(k + 1):
            d = b[m] * u[k] * v[k] + S[k] * a[m] * u[k] ** 2 * v[k]
            if m < k:
                d += S[k] * u[k] * a[m] * v[k] ** 2 + a[m] * v[k] ** 2 / mu_o[k]
            grad[m] += ck * d
    out = np.empty(n)
    out[order] = grad
    return out


@dataclass
class PriorityPlan:
    order: list
    lam: np.ndarray
    wait_tilde: np.ndarray
    prices: np.ndarray
    total_wait_cost: float
    objective: float
    gradient_norm: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def total_rate(self) -> float:
        return float(self.lam.sum())

    def as_dict(self, inst: Optional[Instance] = None) -> dict:
        ids = [p.id for p in inst.products] if inst else list(range(len(self.lam)))
        return {
            "order": [ids[i] for i in self.order],
            "lambda": [float(x) for x in self.lam],
            "wait_tilde": [float(x) for x in self.wait_tilde],
            "prices": [float(x) for x in self.prices],
            "total_wait_cost": self.total_wait_cost,
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
        }


def objective(lam, r, order, mu, c) -> float:
    """Revenue when rates lam are induced by market-clearing prices."""
    lam = np.asarray(lam, dtype=float)
    tot = lam.sum()
    if np.any(lam <= 0) or tot >= 1:
        return -math.inf
    try:
        cost = total_wait_cost(order, lam, mu, c)
    except InfeasibleLoad:
        return -math.inf
    return float(np.sum(lam * (np.asarray(r) - np.log(lam))) + tot * math.log1p(-tot) - cost)


def objective_gradient(lam, r, order, mu, c) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    tot = lam.sum()
    g = np.asarray(r, dtype=float) - np.log(lam) - 1.0 + math.log1p(-tot) - tot / (1 - tot)
    return g - wait_cost_gradient(order, lam, mu, c)


def prices_for(lam, r, order, mu, c) -> tuple[np.ndarray, np.ndarray]:
    lam = np.asarray(lam, dtype=float)
    waits = priority_waits(order, lam, mu)
    p = np.asarray(r) - np.log(lam) + math.log1p(-lam.sum()) - np.asarray(c) * waits
    return p, waits


def priority_pricing_special(r: Sequence[float], mu: float, c: float,
                             order: Optional[Sequence[int]] = None) -> PriorityPlan:
    """Optimal prices with priorities when all classes share c and mu.

    The optimal rates coincide with the single-price optimum because the total
    waiting cost does not depend on the order; only the split of the price
    across positions changes.
    """
    r = np.asarray(r, dtype=float)
    n = r.size
    order = list(range(n)) if order is None else list(order)
    sol = optimal_pricing(r, mu, c)
    lam = sol.lambda_i_star
    base = sol.price_star + c / (mu - sol.lambda_star)
    A = np.cumsum(lam[order])
    A_before = np.concatenate(([0.0], A[:-1]))
    prices = np.empty(n)
    prices[order] = base - c * mu / ((mu - A_before) * (mu - A))
    waits = priority_waits(order, lam, np.full(n, mu))
    cost = float(c * np.sum(lam * waits))
    obj = float(np.sum(prices * lam))
    return PriorityPlan(order, lam, waits, prices, cost, obj)


def _random_start(rng, n, mu):
    share = rng.dirichlet(np.ones(n))
    scale = rng.uniform(0.05, 0.5) * min(1.0, 1.0 / np.sum(share / mu))
    return share * scale


def _ascend(x, r, order, mu, c, max_iter=3000, tol=1e-6):
    # gradient ascent in log-rates with Barzilai-Borwein steps and Armijo backtracking
    lam = np.exp(x)
    f = objective(lam, r, order, mu, c)
    g = objective_gradient(lam, r, order, mu, c) * lam
    step = 0.1
    it = 0
    for it in range(max_iter):
        gl = g / lam
        if np.linalg.norm(gl) <= tol:
            break
        t = step
        while True:
            x_new = x + t * g
            lam_new = np.exp(x_new)
            load = np.cumsum((lam_new / mu)[list(order)])
            if lam_new.sum() < LOAD_CAP and load[-1] < LOAD_CAP:
                f_new = objective(lam_new, r, order, mu, c)
                if f_new >= f + 1e-4 * t * g.dot(g) or t < 1e-16:
                    break
            t *= 0.5
            if t < 1e-20:
                return x, f, it
        g_new = objective_gradient(lam_new, r, order, mu, c) * lam_new
        s, y = x_new - x, g_new - g
        sy = s.dot(y)
        step = min(max(-s.dot(s) / sy, 1e-6), 1e3) if sy < 0 else min(2 * t, 1e3)
        x, f, g, lam = x_new, f_new, g_new, lam_new
    return x, f, it


def _feasible(lam, order, mu):
    return lam.min() > 0 and lam.sum() < LOAD_CAP and np.sum(lam / mu) < LOAD_CAP


def _newton(lam, r, order, mu, c, max_iter=50):
    # polish with Newton steps on a finite-difference Hessian of the exact gradient
    f = objective(lam, r, order, mu, c)
    for _ in range(max_iter):
        g = objective_gradient(lam, r, order, mu, c)
        if np.linalg.norm(g) <= 0.01 * GRAD_TOL:
            break
        n = lam.size
        H = np.empty((n, n))
        for i in range(n):
            h = 1e-6 * lam[i]
            e = np.zeros(n)
            e[i] = h
            H[:, i] = (objective_gradient(lam + e, r, order, mu, c) - objective_gradient(lam - e, r, order, mu, c)) / (2 * h)
        H = 0.5 * (H + H.T)
        try:
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if d.dot(g) <= 0:
            d = g
        t = 1.0
        while t > 1e-12:
            new = lam + t * d
            if _feasible(new, order, mu):
                f_new = objective(new, r, order, mu, c)
                if f_new >= f - 1e-15 * max(1.0, abs(f)):
                    break
            t *= 0.5
        else:
            break
        lam, f = new, f_new
    return lam, f


def priority_pricing_general(inst: Instance, restarts: int = 10, seed: int = 0,
                             order: Optional[Sequence[int]] = None) -> PriorityPlan:
    """Rates and prices maximizing revenue for a fixed priority order.

    The order defaults to the c-mu rule. The revenue is maximized over the
    open region where every prefix load is below 1, from one deterministic
    and ``restarts`` random starting points; the best stationary point wins.
    """
    r = inst.r
    mu = inst.service_rates
    c = inst.cost_rates
    if np.any(np.isnan(mu)) or np.any(np.isnan(c)):
        raise ValueError("every class needs mu and c")
    n = inst.n
    order = cmu_order(c, mu) if order is None else list(order)
    starts = [np.exp(r - r.max()) / n * 0.5 * min(1.0, 1.0 / np.sum(np.exp(r - r.max()) / n / mu))]
    for k in range(restarts):
        starts.append(_random_start(np.random.default_rng([seed, k]), n, mu))
    best = None
    for lam0 in starts:
        x, f, it = _ascend(np.log(lam0), r, order, mu, c)
        lam, f = _newton(np.exp(x), r, order, mu, c)
        if best is None or f > best[1] + 1e-12:
            best = (lam, f, it)
    if best is None or not math.isfinite(best[1]):
        raise ArithmeticError("no interior feasible point found")
    lam = best[0]
    grad = float(np.linalg.norm(objective_gradient(lam, r, order, mu, c)))
    prices, waits = prices_for(lam, r, order, mu, c)
    cost = total_wait_cost(order, lam, mu, c)
    plan = PriorityPlan(order, lam, waits, prices, cost, best[1], grad,
                        {"iterations": best[2], "starts": len(starts)})
    if grad > GRAD_TOL:
        raise ArithmeticError(f"ascent stalled with gradient norm {grad:.3g} at lambda={lam.tolist()}")
    return plan


def best_order_by_enumeration(inst: Instance, lam: Sequence[float]) -> tuple[list, float]:
    """Permutation minimizing total waiting cost at fixed rates (n! search)."""
    mu, c = inst.service_rates, inst.cost_rates
    best = None
    for perm in itertools.permutations(range(inst.n)):
        cost = total_wait_cost(perm, lam, mu, c)
        if best is None or cost < best[1] - 1e-15:
            best = (list(perm), cost)
    return best
