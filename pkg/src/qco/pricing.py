"""Optimal uniform pricing and comparative statics in mu and c.

The revenue-maximizing purchase rate solves

    F(lam) = a - log(lam / (1 - lam)) - lam / (1 - lam) - c mu / (mu - lam)^2 = 0,

with ``a = logsumexp(r) - 1``. F is strictly decreasing, so bisection finds the
unique root. Every product gets the same price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .equilibrium import EDGE, LOWER, _bisect_decreasing

LAMBDA_TOL = 1e-10


@dataclass(frozen=True)
class PricingSolution:
    lambda_star: float
    price_star: float
    lambda_i_star: np.ndarray
    revenue_star: float
    a: float

    def as_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "price_star": self.price_star,
            "lambda_i_star": [float(x) for x in self.lambda_i_star],
            "revenue_star": self.revenue_star,
            "a": self.a,
        }


def shorthand_a(r: Sequence[float]) -> float:
    return float(logsumexp(np.asarray(r, dtype=float))) - 1.0


def _slack(lam: float, a: float) -> float:
    # a - log(lam/(1-lam)) - lam/(1-lam); positive below the c = 0 optimum
    return a - math.log(lam) + math.log1p(-lam) - lam / (1.0 - lam)


def F(lam: float, a: float, mu: float, c: float) -> float:
    return _slack(lam, a) - c * mu / (mu - lam) ** 2


def price_at(lam: float, lse: float, mu: float, c: float) -> float:
    """Uniform price that induces total purchase rate ``lam``."""
    return lse - math.log(lam) + math.log1p(-lam) - c / (mu - lam)


def optimal_pricing(r: Sequence[float], mu: float, c: float) -> PricingSolution:
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one product")
    if mu <= 0 or c < 0:
        raise ValueError(f"need mu > 0 and c >= 0, got mu={mu}, c={c}")
    lse = float(logsumexp(r))
    a = lse - 1.0
    hi = min(1.0, mu) * (1.0 - EDGE)
    if c == 0 and F(hi, a, mu, c) > 0:
        raise ValueError("without congestion cost the optimum sits on the stability boundary")
    lam = _bisect_decreasing(lambda x: F(x, a, mu, c), LOWER, hi)
    p = price_at(lam, lse, mu, c)
    shares = np.exp(r - lse)
    return PricingSolution(lam, p, shares * lam, p * lam, a)


# -- comparative statics ---------------------------------------------------

def mu_of_lambda(lam: float, a: float, c: float) -> float:
    """Service rate at which ``lam`` is the optimal purchase rate (fixed c > 0).

    Larger root of X mu^2 - (2 X lam + c) mu + X lam^2 = 0 with X = slack(lam).
    """
    X = _slack(lam, a)
    if X <= 0 or c <= 0:
        return math.inf
    b = 2.0 * X * lam + c
    disc = c * c + 4.0 * X * lam * c
    return (b + math.sqrt(disc)) / (2.0 * X)


def c_of_lambda(lam: float, a: float, mu: float) -> float:
    """Waiting-cost rate at which ``lam`` is the optimal purchase rate (fixed mu)."""
    return _slack(lam, a) * (mu - lam) ** 2 / mu


def dprice_dlambda_c(lam: float, a: float, mu: float) -> float:
    """d p* / d lam* along the curve parametrized by c (mu fixed)."""
    return (1.0 - 1.0 / mu) / (1.0 - lam) ** 2 + _slack(lam, a) / mu


def f1(lam: float, mu: float, c: float) -> float:
    """Sign of d p* / d lam* along the curve parametrized by mu (c fixed)."""
    q = (mu - lam) / (1.0 - lam)
    return -2.0 * q + q * q + c


def _c0_root(a: float) -> float:
    # zero of the slack, i.e. optimal rate without congestion cost
    return _bisect_decreasing(lambda x: _slack(x, a), LOWER, 1.0 - EDGE)


@dataclass
class StaticsReport:
    param: str
    grid: np.ndarray
    lambda_star: np.ndarray
    price_star: np.ndarray
    revenue_star: np.ndarray
    dlambda: np.ndarray
    dprice: np.ndarray
    drevenue: np.ndarray
    segments: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def rows(self):
        for k in range(len(self.grid)):
            yield self.grid[k], self.lambda_star[k], self.price_star[k], self.revenue_star[k]

    def as_dict(self) -> dict:
        return {
            "param": self.param,
            "grid": self.grid.tolist(),
            "lambda_star": self.lambda_star.tolist(),
            "price_star": self.price_star.tolist(),
            "revenue_star": self.revenue_star.tolist(),
            "segments": [list(s) for s in self.segments],
            "thresholds": self.thresholds,
            "flags": self.flags,
        }


def _step(x: float) -> float:
    return 1e-5 * max(1.0, abs(x))


def _segments(grid: np.ndarray, deriv: np.ndarray, tol: float = 1e-8) -> list:
    """Maximal runs of the grid on which ``deriv`` keeps one sign."""
    signs = np.where(deriv > tol, 1, np.where(deriv < -tol, -1, 0))
    out = []
    start = 0
    cur = signs[0]
    for k in range(1, len(signs)):
        s = signs[k]
        if s == 0 or s == cur or cur == 0:
            if cur == 0:
                cur = s
            continue
        out.append((float(grid[start]), float(grid[k - 1]), _label(cur)))
        start, cur = k, s
    out.append((float(grid[start]), float(grid[-1]), _label(cur)))
    return out


def _label(s: int) -> str:
    return {1: "increasing", -1: "decreasing", 0: "flat"}[int(s)]


def _sweep(solve, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    lam = np.empty(grid.size)
    price = np.empty(grid.size)
    rev = np.empty(grid.size)
    dl = np.empty(grid.size)
    dp = np.empty(grid.size)
    dr = np.empty(grid.size)
    for k, x in enumerate(grid):
        sol = solve(x)
        lam[k], price[k], rev[k] = sol.lambda_star, sol.price_star, sol.revenue_star
        h = _step(x)
        lo_x = max(x - h, 0.5 * x) if x > 0 else x
        up, dn = solve(x + h), solve(lo_x)
        span = x + h - lo_x
        dl[k] = (up.lambda_star - dn.lambda_star) / span
        dp[k] = (up.price_star - dn.price_star) / span
        dr[k] = (up.revenue_star - dn.revenue_star) / span
    return grid, lam, price, rev, dl, dp, dr


def price_thresholds_mu(r: Sequence[float], c: float) -> Optional[tuple[float, float]]:
    """Service rates bounding the interval on which p* decreases in mu.

    Returns None when c > 1 (p* increases everywhere) or c == 0 (no congestion
    term, p* does not depend on mu).
    """
    if c <= 0 or c > 1:
        return None
    a = shorthand_a(r)
    top = _c0_root(a)
    root = math.sqrt(1.0 - c)

    def q(lam):
        return (mu_of_lambda(lam, a, c) - lam) / (1.0 - lam)

    def solve_q(target):
        if target <= 0:
            return 0.0
        lo, hi = LOWER, top * (1.0 - EDGE)
        while hi - lo > LAMBDA_TOL:
            mid = 0.5 * (lo + hi)
            if q(mid) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    lam_lo, lam_hi = solve_q(1.0 - root), solve_q(1.0 + root)
    mu_lo = 0.0 if lam_lo == 0.0 else mu_of_lambda(lam_lo, a, c)
    return mu_lo, mu_of_lambda(lam_hi, a, c)


def statics_mu(r: Sequence[float], c: float, mu_grid) -> StaticsReport:
    grid, lam, price, rev, dl, dp, dr = _sweep(lambda m: optimal_pricing(r, m, c), mu_grid)
    rep = StaticsReport("mu", grid, lam, price, rev, dl, dp, dr)
    rep.segments = _segments(grid, dp)
    rep.flags["dlambda_in_unit_interval"] = bool(np.all((dl > 0) & (dl < 1)))
    rep.flags["revenue_nondecreasing"] = bool(np.all(np.diff(rev) >= -1e-9))
    rep.flags["price_monotone_increasing"] = bool(c >= 1 and np.all(np.diff(price) >= -1e-9))
    th = price_thresholds_mu(r, c)
    if th is not None:
        rep.thresholds = {"mu_lower": th[0], "mu_upper": th[1]}
    return rep


def price_threshold_c(r: Sequence[float], mu: float) -> Optional[dict]:
    """Turning point c3 of p*(c) when mu < 1, else None.

    p*(c) increases below c3 and decreases above it.
    """
    lse = float(logsumexp(np.asarray(r, dtype=float)))
    a = lse - 1.0
    if mu >= 1:
        return None
    condition = lse - math.log(mu / (1.0 - mu)) - (1.0 + mu) / (1.0 - mu)
    if condition >= 1:
        return None
    top = min(_c0_root(a), mu) * (1.0 - EDGE)
    lo, hi = LOWER, top
    # d p / d lam is decreasing in lam on this range
    while hi - lo > LAMBDA_TOL:
        mid = 0.5 * (lo + hi)
        if dprice_dlambda_c(mid, a, mu) > 0:
            lo = mid
        else:
            hi = mid
    lam3 = 0.5 * (lo + hi)
    return {"lambda3": lam3, "c3": c_of_lambda(lam3, a, mu), "condition": condition}


def statics_c(r: Sequence[float], mu: float, c_grid) -> StaticsReport:
    grid, lam, price, rev, dl, dp, dr = _sweep(lambda cc: optimal_pricing(r, mu, cc), c_grid)
    rep = StaticsReport("c", grid, lam, price, rev, dl, dp, dr)
    rep.segments = _segments(grid, dp)
    rep.flags["price_nonincreasing"] = bool(np.all(np.diff(price) <= 1e-8))
    diffs = np.diff(rev)
    if np.all(diffs <= 1e-12):
        rep.flags["revenue_direction"] = "decreasing"
    elif np.all(diffs >= -1e-12):
        rep.flags["revenue_direction"] = "increasing"
    else:
        rep.flags["revenue_direction"] = "mixed"
    th = price_threshold_c(r, mu)
    if th is not None:
        rep.thresholds = th
    return rep
