from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Instance
from ..equilibrium import equilibrium, solve_lambda_hetero_many, solve_lambda_homog_many

MAX_BRUTE_N = 22


@dataclass
class AssortmentSolution:
    subset: tuple[int, ...]
    revenue: float
    lam: float
    method: str
    guarantee: float
    epsilon: Optional[float] = None
    stats: dict = field(default_factory=dict)

    def as_dict(self, inst: Optional[Instance] = None) -> dict:
        out = {
            "method": self.method,
            "subset": [inst.products[i].id for i in self.subset] if inst else list(self.subset),
            "revenue": self.revenue,
            "guarantee": self.guarantee,
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        out["lambda"] = self.lam
        return out


def solution(inst: Instance, subset, method: str, guarantee: float, epsilon=None, mode="auto",
             stats=None) -> AssortmentSolution:
    eq = equilibrium(inst, subset, mode)
    return AssortmentSolution(eq.subset, eq.revenue, eq.lam, method, guarantee, epsilon, stats or {})


def effective_arrays(inst: Instance, mode: str = "auto"):
    """Per-product weights, prices and service rates used by the revenue formula.

    Heterogeneous weights include the own-service factor exp(-c / mu_i).
    """
    if mode == "auto":
        mode = "hetero" if inst.heterogeneous else "homog"
    w = inst.weights
    p = inst.prices
    if np.any(np.isnan(p)):
        raise ValueError("all prices must be set")
    mus = inst.service_rates
    if mode == "hetero":
        w = w * np.exp(-inst.c / mus)
    return mode, w, p, mus


def subset_revenues(inst: Instance, masks: np.ndarray, mode: str = "auto") -> np.ndarray:
    """Revenue of every subset encoded as a bit mask (bit i = product i)."""
    mode, w, p, mus = effective_arrays(inst, mode)
    bits = ((masks[:, None] >> np.arange(inst.n)) & 1).astype(float)
    W = bits @ w
    PW = bits @ (p * w)
    out = np.zeros(masks.shape)
    nz = W > 0
    if mode == "homog":
        lam = solve_lambda_homog_many(W[nz], inst.mu, inst.c)
    else:
        lam = solve_lambda_hetero_many(W[nz], (bits @ (w / mus))[nz], (bits @ (w / mus**2))[nz], inst.c)
    out[nz] = PW[nz] / W[nz] * lam
    return out


def mask_to_subset(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(int(mask).bit_length()) if mask >> i & 1)


def _tie_key(mask: int):
    members = mask_to_subset(mask)
    return (len(members), members)


def brute_force(inst: Instance, capacity: Optional[int] = None, mode: str = "auto",
                chunk: int = 1 << 15) -> AssortmentSolution:
    """Exact optimum by enumerating every nonempty subset (|S| <= capacity).

    Equal revenues (within 1e-12 relative) go to the smaller, then
    lexicographically smaller, index set.
    """
    n = inst.n
    if n > MAX_BRUTE_N:
        raise ValueError(f"brute force limited to {MAX_BRUTE_N} products, got {n}")
    if capacity is not None and capacity < 1:
        raise ValueError("capacity must be >= 1")
    best, cands = -math.inf, []
    total = 1 << n
    for start in range(1, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        if capacity is not None:
            sizes = np.array([bin(m).count("1") for m in masks]) if n > 16 else _popcount(masks)
            masks = masks[sizes <= capacity]
            if masks.size == 0:
                continue
        rev = subset_revenues(inst, masks, mode)
        top = rev.max()
        tol = 1e-12 * max(1.0, abs(max(top, best)))
        if top > best + tol:
            best = top
            cands = [int(m) for m in masks[rev >= top - tol]]
        elif top >= best - tol:
            best = max(best, top)
            cands += [int(m) for m in masks[rev >= best - tol]]
    pick = min(cands, key=_tie_key)
    return solution(inst, mask_to_subset(pick), "oracle", 1.0, mode=mode,
                    stats={"subsets": int(total - 1)})


def _popcount(masks: np.ndarray) -> np.ndarray:
    out = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        out += m & 1
        m >>= 1
    return out


def optimality_condition(mu: float, c: float) -> tuple[bool, dict]:
    """Whether nested-by-price assortments are optimal for every product set.

    True iff mu >= 1 or c >= 2 mu (1 - mu). The certificate reports the sign of
    s(x) = c (1 - x) - 2 (1 - mu)(mu - x), which drives the curvature of
    (1 - x) exp(-c / (mu - x)), at both ends of the stability interval.
    """
    if mu <= 0 or c < 0:
        raise ValueError("need mu > 0 and c >= 0")

    def s(x):
        return c * (1.0 - x) - 2.0 * (1.0 - mu) * (mu - x)

    top = min(1.0, mu) * (1.0 - 1e-12)
    ok = mu >= 1 or c >= 2.0 * mu * (1.0 - mu)
    return ok, {"s_at_0": s(0.0), "s_at_top": s(top), "convex": bool(ok)}


def revenue_ordered(inst: Instance, mode: str = "auto") -> AssortmentSolution:
    """Best of the n nested sets formed by the k highest-priced products."""
    mode, w, p, mus = effective_arrays(inst, mode)
    order = sorted(range(inst.n), key=lambda i: (-p[i], i))
    masks = np.cumsum([1 << i for i in order]).astype(np.int64)
    rev = subset_revenues(inst, masks, mode)
    k = int(np.argmax(rev))
    if mode == "homog":
        ok, cert = optimality_condition(inst.mu, inst.c)
        guarantee = 1.0 if ok else 1.0 / 3.0
    else:
        cert, guarantee = {}, 0.0
    sol = solution(inst, order[: k + 1], "revenue_order", guarantee, mode=mode,
                   stats={"prefix_revenues": rev.tolist(), "order": order, "certificate": cert})
    return sol
