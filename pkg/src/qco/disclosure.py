"""Queue-length disclosure: join rates, birth-death steady states and pricing.

Under a threshold-k policy an arriving customer sees the exact queue length
L while L < k and only "at least k" otherwise. Informed customers join at
rate lambda_L; uninformed ones at the self-consistent tail rate lambda'_k.
k = 0 is the no-information (nondisclosure) regime and k = inf is full
disclosure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .core import Instance, aggregates
from .equilibrium import EDGE, LOWER, _bisect_decreasing, solve_lambda_homog

SERIES_RTOL = 1e-15
MAX_STATES = 10_000_000


def join_rate_at_length(W: float, mu: float, c: float, L) -> np.ndarray | float:
    """Joining rate of a customer who sees L people in the system."""
    L = np.asarray(L, dtype=float)
    # W / (exp(t) + W) written to avoid overflow for large t
    t = c * (L + 1.0) / mu
    out = 1.0 / (1.0 + np.exp(t - math.log(W))) if W > 0 else np.zeros_like(t)
    return float(out) if out.ndim == 0 else out


def tail_join_rate(W: float, mu: float, c: float, k: int) -> float:
    """Fixed point lambda' = W / (exp(t_k) + W) of the uninformed customers.

    t_k = (k + 1) c / mu + c lambda' / (mu (mu - lambda')) is the expected
    waiting disutility given at least k customers ahead and a geometric excess.
    """
    if W < 0 or mu <= 0 or c < 0 or k < 0:
        raise ValueError("need W >= 0, mu > 0, c >= 0, k >= 0")
    if W == 0:
        return 0.0
    if c == 0:
        return W / (1.0 + W)
    logW = math.log(W)
    base = (k + 1) * c / mu

    def g(lam):
        # log-odds residual, decreasing in lam
        return logW - base - c * lam / (mu * (mu - lam)) - (math.log(lam) - math.log1p(-lam))

    return _bisect_decreasing(g, LOWER, min(1.0, mu) * (1.0 - EDGE))


@dataclass
class DisclosureChain:
    k: Optional[int]
    join_rates: np.ndarray
    tail_rate: Optional[float]
    probs: np.ndarray
    tail_mass: float
    mu: float

    @property
    def P0(self) -> float:
        return float(self.probs[0])

    @property
    def throughput(self) -> float:
        return self.mu * (1.0 - self.P0)

    @property
    def truncation(self) -> int:
        return self.probs.size - 1

    def prob(self, l: int) -> float:
        """Stationary probability of l customers in the system."""
        if l < self.probs.size:
            return float(self.probs[l])
        if self.tail_rate is None:
            return 0.0
        rho = self.tail_rate / self.mu
        return float(self.probs[-1] * rho ** (l - self.probs.size + 1))

    def rate_at(self, l: int) -> float:
        if self.k is None or l < self.k:
            return float(self.join_rates[l]) if l < self.join_rates.size else 0.0
        return float(self.tail_rate)

    def residuals(self) -> dict:
        n = self.probs.size
        head = np.array([self.rate_at(l) for l in range(n)])
        inflow = float(np.dot(self.probs, head))
        if self.tail_rate is not None:
            inflow += self.tail_rate * self.tail_mass
        return {
            "normalization": float(self.probs.sum() + self.tail_mass - 1.0),
            "flow_balance": inflow - self.throughput,
        }

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "join_rates": self.join_rates.tolist(),
            "tail_rate": self.tail_rate,
            "P0": self.P0,
            "throughput": self.throughput,
            "truncation": self.truncation,
            "tail_mass": self.tail_mass,
            "probs": self.probs.tolist(),
        }


def steady_state(join_rates: Sequence[float], mu: float, tail_rate: Optional[float] = None) -> DisclosureChain:
    """Stationary law of the birth-death chain with rates lambda_0..lambda_{k-1}, then tail_rate.

    ``probs`` holds P_0..P_k; states beyond k form a geometric tail with ratio
    tail_rate / mu. With ``tail_rate=None`` the given rates are taken as the
    whole (already truncated) chain.
    """
    rates = np.asarray(join_rates, dtype=float)
    if mu <= 0 or np.any(rates < 0):
        raise ValueError("need mu > 0 and nonnegative rates")
    if tail_rate is not None and tail_rate >= mu:
        raise ValueError(f"tail rate {tail_rate} >= mu={mu}: the chain is transient")
    k = rates.size
    with np.errstate(divide="ignore"):
        logs = np.concatenate(([0.0], np.cumsum(np.log(rates / mu))))
    top = logs.max()
    rel = np.exp(logs - top)
    if tail_rate is None:
        total = rel.sum()
        return DisclosureChain(None, rates, None, rel / total, 0.0, mu)
    rho = tail_rate / mu
    tail = rel[-1] * rho / (1.0 - rho)
    total = rel.sum() + tail
    return DisclosureChain(k, rates, tail_rate, rel / total, tail / total, mu)


def threshold_chain(W: float, mu: float, c: float, k: Optional[int]) -> DisclosureChain:
    """Chain under a threshold-k policy; ``k=None`` means full disclosure."""
    if k is None:
        return full_disclosure_chain(W, mu, c)
    rates = join_rate_at_length(W, mu, c, np.arange(k)) if k > 0 else np.zeros(0)
    return steady_state(np.atleast_1d(rates), mu, tail_join_rate(W, mu, c, k))


def full_disclosure_chain(W: float, mu: float, c: float, log_shift: float = 0.0) -> DisclosureChain:
    """Every customer sees the queue; rates W / (exp(c (L+1)/mu + shift) + W)."""
    if c == 0:
        lam = W / (W + math.exp(log_shift))
        chain = steady_state([], mu, lam)
        chain.k = None
        return chain
    logW = math.log(W) if W > 0 else -math.inf
    chunk = 1024
    logs = [np.zeros(1)]
    running, partial = 0.0, 1.0
    L0 = 0
    while True:
        L = np.arange(L0, L0 + chunk, dtype=float)
        t = c * (L + 1.0) / mu + log_shift
        log_rate = -np.logaddexp(0.0, t - logW)
        steps = running + np.cumsum(log_rate - math.log(mu))
        terms = np.exp(steps)
        cum = partial + np.cumsum(terms)
        small = terms < SERIES_RTOL * cum
        # ratios are decreasing once rates drop below mu, so the tail is geometric-bounded
        ratio = np.exp(log_rate - math.log(mu))
        stop = np.nonzero(small & (ratio < 1))[0]
        if stop.size:
            cut = stop[0] + 1
            logs.append(steps[:cut])
            bound = terms[cut - 1] * ratio[cut - 1] / (1 - ratio[cut - 1])
            break
        logs.append(steps)
        running, partial = steps[-1], cum[-1]
        L0 += chunk
        if L0 > MAX_STATES:
            raise ArithmeticError("full-disclosure series did not converge")
    allsteps = np.concatenate(logs)
    rel = np.exp(allsteps)
    total = rel.sum()
    n = rel.size
    rates = 1.0 / (1.0 + np.exp(c * (np.arange(n) + 1.0) / mu + log_shift - logW))
    return DisclosureChain(None, rates, None, rel / total, float(bound / total), mu)


@dataclass
class ShareCurve:
    W: float
    mu: float
    c: float
    F: np.ndarray
    F_inf: float
    tail_rates: np.ndarray
    monotone_from: int
    nondecreasing: bool

    def as_dict(self) -> dict:
        return {
            "W": self.W, "mu": self.mu, "c": self.c,
            "F": self.F.tolist(), "F_inf": self.F_inf,
            "tail_rates": self.tail_rates.tolist(),
            "monotone_from": self.monotone_from,
            "nondecreasing": self.nondecreasing,
        }


def market_share_curve(W: float, mu: float, c: float, k_max: int, tol: float = 1e-12) -> ShareCurve:
    """Throughput F(k) for thresholds 0..k_max and under full disclosure."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    F = np.empty(k_max + 1)
    tails = np.empty(k_max + 1)
    for k in range(k_max + 1):
        chain = threshold_chain(W, mu, c, k)
        F[k], tails[k] = chain.throughput, chain.tail_rate
    F_inf = full_disclosure_chain(W, mu, c).throughput
    drops = np.nonzero(np.diff(F) < -tol)[0]
    start = int(drops[-1] + 1) if drops.size else 0
    return ShareCurve(W, mu, c, F, F_inf, tails, start, drops.size == 0)


@dataclass
class DisclosureVerdict:
    verdict: str
    lam: float
    lam_hat: float
    revenue_nondisclosure: float
    revenue_disclosure: float
    inequality_holds: bool

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "lambda": self.lam,
            "lambda_hat": self.lam_hat,
            "revenue_nondisclosure": self.revenue_nondisclosure,
            "revenue_disclosure": self.revenue_disclosure,
        }


def compare_rates(W: float, mu: float, c: float, rtol: float = 1e-12) -> tuple[str, float, float, bool]:
    lam = solve_lambda_homog(W, mu, c)
    lam_hat = full_disclosure_chain(W, mu, c).throughput
    if abs(lam_hat - lam) <= rtol * max(lam, lam_hat):
        verdict = "tie"
    else:
        verdict = "disclosure" if lam_hat > lam else "nondisclosure"
    # disclosure helps iff W < exp(c / (mu - lam_hat)) lam_hat / (1 - lam_hat)
    lhs = math.log(W)
    rhs = c / (mu - lam_hat) + math.log(lam_hat) - math.log1p(-lam_hat)
    holds = lhs < rhs
    if verdict != "tie" and holds != (verdict == "disclosure"):
        raise AssertionError(f"rate comparison and inequality test disagree at W={W}, mu={mu}, c={c}")
    return verdict, lam, lam_hat, holds


def compare_disclosure(inst: Instance, subset: Optional[Iterable[int]] = None) -> DisclosureVerdict:
    """Revenue with and without full queue-length disclosure for one assortment.

    Both regimes share the average price PW / W, so the verdict only compares
    the purchase rates.
    """
    if inst.mu is None:
        raise ValueError("disclosure comparison needs a global service rate")
    subset = range(inst.n) if subset is None else subset
    agg = aggregates(inst, subset)
    if agg.W == 0:
        raise ValueError("empty assortment")
    verdict, lam, lam_hat, holds = compare_rates(agg.W, inst.mu, inst.c)
    avg = agg.PW / agg.W
    return DisclosureVerdict(verdict, lam, lam_hat, avg * lam, avg * lam_hat, holds)


@dataclass
class DisclosurePrice:
    price: float
    throughput: float
    revenue: float
    shares: np.ndarray
    unimodal: bool
    grid_size: int
    k: Optional[int] = None

    @property
    def product_rates(self) -> np.ndarray:
        return self.shares * self.throughput

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "price": self.price,
            "throughput": self.throughput,
            "revenue": self.revenue,
            "product_rates": self.product_rates.tolist(),
            "unimodal_on_grid": self.unimodal,
        }


def disclosure_revenue(p: float, r: Sequence[float], mu: float, c: float, k: Optional[int] = None) -> float:
    """Revenue p * mu (1 - P0) when every product sells at price p under threshold k.

    ``k=None`` is full disclosure.
    """
    if p <= 0:
        return 0.0
    lse = float(logsumexp(np.asarray(r, dtype=float)))
    try:
        if k is None:
            # W' exp(-p) may underflow, so the price enters as a shift of the exponent
            chain = full_disclosure_chain(1.0, mu, c, log_shift=p - lse)
        else:
            chain = threshold_chain(math.exp(lse - p), mu, c, k)
    except ValueError:
        # without waiting cost a cheap enough price overloads the server
        return p * mu
    return p * chain.throughput


def full_disclosure_revenue(p: float, r: Sequence[float], mu: float, c: float) -> float:
    return disclosure_revenue(p, r, mu, c, None)


def optimal_price_disclosure(r: Sequence[float], mu: float, c: float, k: Optional[int] = None,
                             grid_size: int = 400, xtol: float = 1e-8) -> DisclosurePrice:
    """Uniform price maximizing revenue under threshold k (``None``: full disclosure).

    A logarithmic grid brackets the global maximum; golden-section search
    refines it. Whether the sampled revenue curve had a single peak is reported.
    """
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one product")
    if mu <= 0 or c < 0:
        raise ValueError("need mu > 0 and c >= 0")
    lse = float(logsumexp(r))
    hi = max(50.0, lse + 50.0)
    grid = np.concatenate(([0.0], np.geomspace(1e-6, hi, grid_size)))

    def rev(p):
        return disclosure_revenue(p, r, mu, c, k)

    vals = np.array([rev(p) for p in grid])
    j = int(np.argmax(vals))
    peaks = int(np.sum((vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])))
    p = float(grid[j])
    if 0 < j < grid.size - 1:
        res = optimize.minimize_scalar(lambda x: -rev(x), bracket=(grid[j - 1], grid[j], grid[j + 1]),
                                       method="golden", options={"xtol": xtol / max(grid[j], 1.0)})
        if -res.fun >= vals[j]:
            p = float(res.x)
    value = rev(p)
    shares = np.exp(r - lse)
    return DisclosurePrice(p, value / p if p > 0 else 0.0, value, shares, peaks <= 1, grid.size, k)


def optimal_price_full_disclosure(r: Sequence[float], mu: float, c: float, **kw) -> DisclosurePrice:
    return optimal_price_disclosure(r, mu, c, None, **kw)
