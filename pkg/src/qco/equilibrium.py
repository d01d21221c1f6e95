"""Equilibrium purchase rates for a fixed assortment and fixed prices.

Customers anticipate congestion, so the total purchase rate lambda is the
fixed point of ``W = lambda / (1 - lambda) * exp(c / (mu - lambda))`` in the
single-rate case. Both solvers bisect a strictly monotone log-residual, which
cannot fail to converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import Aggregates, Instance, aggregates

LOWER = 1e-300
EDGE = 1e-12
MAX_ITER = 200


class ConvergenceError(ArithmeticError):
    pass


def _bisect_decreasing(g, lo: float, hi: float) -> float:
    """Root of a strictly decreasing g on (lo, hi), bisected to float resolution."""
    glo, ghi = g(lo), g(hi)
    if glo <= 0:
        return lo
    if ghi >= 0:
        return hi
    for _ in range(MAX_ITER):
        # geometric steps while the bracket spans orders of magnitude
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi))) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm > 0:
            lo, glo = mid, gm
        elif gm < 0:
            hi, ghi = mid, gm
        else:
            return mid
    else:
        raise ConvergenceError(f"bisection did not close bracket [{lo!r}, {hi!r}]")
    return lo if abs(glo) <= abs(ghi) else hi


def homog_residual(lam: float, W: float, mu: float, c: float) -> float:
    return math.log(lam) - math.log1p(-lam) + c / (mu - lam) - math.log(W)


def solve_lambda_homog(W: float, mu: float, c: float) -> float:
    """Total purchase rate for aggregate weight W at service rate mu and cost rate c."""
    if W < 0 or mu <= 0 or c < 0:
        raise ValueError(f"need W >= 0, mu > 0, c >= 0; got W={W}, mu={mu}, c={c}")
    if W == 0:
        return 0.0
    if c == 0:
        lam = W / (1.0 + W)
        if lam >= mu:
            raise ValueError(f"no congestion cost and demand {lam} >= mu={mu}: queue is unstable")
        return lam
    logW = math.log(W)
    hi = min(1.0, mu) * (1.0 - EDGE)

    def g(lam):
        return math.log(lam) - math.log1p(-lam) + c / (mu - lam) - logW

    return _bisect_decreasing(lambda x: -g(x), LOWER, hi)


def hetero_residual(lam: float, agg: Aggregates, c: float) -> float:
    x = lam / agg.W
    return math.log(agg.W / lam - agg.W) - c * agg.B * x / (1.0 - agg.A * x)


def solve_lambda_hetero(agg: Aggregates, c: float) -> float:
    """Total purchase rate when products have their own service rates.

    Solves ``W / lambda = W + exp(c * (B lambda / W) / (1 - A lambda / W))``
    on (0, min(1, W / A)).
    """
    if c < 0:
        raise ValueError("c must be >= 0")
    if agg.W == 0:
        return 0.0
    if agg.W < 0 or agg.A <= 0 or agg.B <= 0:
        raise ValueError("aggregates must be positive")
    if c == 0:
        lam = agg.W / (1.0 + agg.W)
        if agg.A * lam / agg.W >= 1:
            raise ValueError("no congestion cost and load >= 1: queue is unstable")
        return lam
    hi = min(1.0, agg.W / agg.A) * (1.0 - EDGE)
    return _bisect_decreasing(lambda lam: hetero_residual(lam, agg, c), LOWER, hi)


def consumer_surplus(lam: float) -> float:
    """Expected inclusive value of the logit choice, -log(1 - lambda)."""
    if not 0 <= lam < 1:
        raise ValueError(f"purchase rate must lie in [0, 1), got {lam}")
    return -math.log1p(-lam)


@dataclass(frozen=True)
class Equilibrium:
    subset: tuple[int, ...]
    lam: float
    lam_i: np.ndarray
    expected_system_time: float
    system_times: np.ndarray
    revenue: float
    consumer_surplus: float

    def as_dict(self, inst: Optional[Instance] = None) -> dict:
        ids = [inst.products[i].id for i in self.subset] if inst else list(self.subset)
        return {
            "subset": ids,
            "lambda": self.lam,
            "lambda_i": [float(x) for x in self.lam_i[list(self.subset)]],
            "expected_system_time": self.expected_system_time,
            "revenue": self.revenue,
            "consumer_surplus": self.consumer_surplus,
        }


def equilibrium(inst: Instance, subset: Optional[Iterable[int]] = None, mode: str = "auto") -> Equilibrium:
    """Equilibrium for the products in ``subset`` (all products by default).

    ``mode`` is ``"homog"`` (one global service rate), ``"hetero"`` (per-product
    rates) or ``"auto"``. In the heterogeneous mode each weight carries its own
    service-time disutility exp(-c / mu_i) so that the model coincides with the
    homogeneous one when all rates are equal.
    """
    subset = tuple(range(inst.n)) if subset is None else tuple(sorted(set(subset)))
    if mode == "auto":
        mode = "hetero" if inst.heterogeneous else "homog"
    if mode not in ("homog", "hetero"):
        raise ValueError(f"unknown mode {mode!r}")
    lam_i = np.zeros(inst.n)
    times = np.full(inst.n, np.nan)
    if not subset:
        return Equilibrium(subset, 0.0, lam_i, 0.0, times, 0.0, 0.0)

    if mode == "homog":
        if inst.mu is None:
            raise ValueError("homogeneous mode needs a global mu")
        agg = aggregates(inst, subset)
        lam = solve_lambda_homog(agg.W, inst.mu, inst.c)
        w = np.array([inst.products[i].weight for i in subset])
        sojourn = 1.0 / (inst.mu - lam)
        times[list(subset)] = sojourn
        mean_time = sojourn
    else:
        agg = aggregates(inst, subset, own_service=True)
        lam = solve_lambda_hetero(agg, inst.c)
        mus = inst.service_rates[list(subset)]
        w = np.array([inst.products[i].weight for i in subset]) * np.exp(-inst.c / mus)
        rho = agg.A * lam / agg.W
        wait = (agg.B * lam / agg.W) / (1.0 - rho)
        times[list(subset)] = wait + 1.0 / mus
        mean_time = wait + agg.A / agg.W

    lam_i[list(subset)] = w / agg.W * lam
    revenue = agg.PW / agg.W * lam
    return Equilibrium(subset, lam, lam_i, mean_time, times, revenue, consumer_surplus(lam))


def revenue(inst: Instance, subset: Iterable[int], mode: str = "auto") -> float:
    return equilibrium(inst, subset, mode).revenue


def _bisect_many(g, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vectorized twin of ``_bisect_decreasing`` for an increasing residual g."""
    for _ in range(MAX_ITER):
        geo = hi > 4.0 * lo
        mid = np.where(geo, np.exp(0.5 * (np.log(lo) + np.log(hi))), 0.5 * (lo + hi))
        done = (mid <= lo) | (mid >= hi)
        if done.all():
            break
        gm = g(mid)
        below = (gm < 0) & ~done
        above = (gm > 0) & ~done
        lo = np.where(below, mid, lo)
        hi = np.where(above, mid, hi)
        exact = (gm == 0) & ~done
        lo = np.where(exact, mid, lo)
        hi = np.where(exact, mid, hi)
    glo, ghi = np.abs(g(lo)), np.abs(g(hi))
    return np.where(glo <= ghi, lo, hi)


def solve_lambda_homog_many(W: np.ndarray, mu: float, c: float) -> np.ndarray:
    """Array version of ``solve_lambda_homog`` (all W > 0)."""
    W = np.asarray(W, dtype=float)
    if c == 0:
        lam = W / (1.0 + W)
        if np.any(lam >= mu):
            raise ValueError("no congestion cost and demand >= mu: queue is unstable")
        return lam
    logW = np.log(W)
    top = min(1.0, mu) * (1.0 - EDGE)

    def g(lam):
        return np.log(lam) - np.log1p(-lam) + c / (mu - lam) - logW

    return _bisect_many(g, np.full(W.shape, LOWER), np.full(W.shape, top))


def solve_lambda_hetero_many(W: np.ndarray, A: np.ndarray, B: np.ndarray, c: float) -> np.ndarray:
    """Array version of ``solve_lambda_hetero``."""
    W, A, B = (np.asarray(x, dtype=float) for x in (W, A, B))
    if c == 0:
        lam = W / (1.0 + W)
        if np.any(A * lam / W >= 1):
            raise ValueError("no congestion cost and load >= 1: queue is unstable")
        return lam
    top = np.minimum(1.0, W / A) * (1.0 - EDGE)

    def g(lam):
        x = lam / W
        return c * B * x / (1.0 - A * x) - np.log(W / lam - W)

    return _bisect_many(g, np.full(W.shape, LOWER), top)
