"""Approximation schemes for unconstrained and capacity-constrained assortments.

Both schemes bucket the unknown optimal sums geometrically, round the item
coefficients onto an integer grid of O(n / eps) cells and solve a
knapsack-style dynamic program for each bucket combination. The best true
revenue over all combinations is returned.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numba import njit

from ..core import Instance
from .base import AssortmentSolution, effective_arrays, mask_to_subset, solution, subset_revenues

MAX_HETERO_N = 62


def _check_eps(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def grid_bounds(n: int, epsilon: float) -> tuple[int, int]:
    """Upper cap on the rounded weight sum and lower cap on the rounded price sum."""
    base = math.floor(n / epsilon * (1 + 1e-12))
    return base + n, base - n


def bucket_count(n: int, hi: float, lo: float, epsilon: float) -> int:
    return math.ceil(math.log(n * hi / lo) / math.log1p(epsilon)) + 2


def _round_up(x: np.ndarray, step: float) -> np.ndarray:
    return np.ceil(x / step * (1 - 1e-12)).astype(np.int64)


def _round_down(x: np.ndarray, step: float) -> np.ndarray:
    return np.floor(x / step * (1 + 1e-12)).astype(np.int64)


# -- homogeneous ---------------------------------------------------------

@njit(cache=True)
def _reach_layers(wh, ph, kmax, mmax):
    n = wh.size
    layers = np.zeros((n + 1, kmax + 1, mmax + 1), dtype=np.bool_)
    layers[0, 0, 0] = True
    for t in range(n):
        prev = layers[t]
        cur = layers[t + 1]
        cur[:, :] = prev
        a, b = wh[t], ph[t]
        if a > kmax:
            continue
        for j in range(kmax - a + 1):
            for m in range(mmax + 1):
                if prev[j, m]:
                    mm = m + b
                    if mm > mmax:
                        mm = mmax
                    cur[j + a, mm] = True
    return layers


@njit(cache=True)
def _backtrack(layers, wh, ph, mmax):
    n = wh.size
    kmax = layers.shape[1] - 1
    j = -1
    for jj in range(1, kmax + 1):
        if layers[n, jj, mmax]:
            j = jj
            break
    if j < 0:
        return -1
    m = mmax
    mask = 0
    for t in range(n, 0, -1):
        if layers[t - 1, j, m]:
            continue
        mask |= 1 << (t - 1)
        j -= wh[t - 1]
        if m < mmax:
            m -= ph[t - 1]
        else:
            lo = mmax - ph[t - 1]
            if lo < 0:
                lo = 0
            for mm in range(mmax, lo - 1, -1):
                if layers[t - 1, j, mm]:
                    m = mm
                    break
    return mask


def fptas_homog(inst: Instance, epsilon: float) -> AssortmentSolution:
    """(1 - 2 eps)-approximate assortment under a single service rate."""
    _check_eps(epsilon)
    mode, w, p, _ = effective_arrays(inst, "homog")
    if np.any(p <= 0):
        raise ValueError("all prices must be positive")
    n = inst.n
    pw = p * w
    kmax, mmax = grid_bounds(n, epsilon)
    f_top = bucket_count(n, w.max(), w.min(), epsilon)
    g_top = bucket_count(n, pw.max(), pw.min(), epsilon)
    records = []
    for f in range(-1, f_top + 1):
        wstep = epsilon * w.min() * (1 + epsilon) ** f / n
        wh = _round_up(w, wstep)
        for g in range(0, g_top + 1):
            pstep = epsilon * pw.min() * (1 + epsilon) ** g / n
            ph = _round_down(pw, pstep)
            layers = _reach_layers(wh, ph, kmax, mmax)
            mask = int(_backtrack(layers, wh, ph, mmax))
            if mask > 0:
                records.append((f, g, mask))
    pairs = (f_top + 2) * (g_top + 1)
    per_pair = (kmax + 1) * (mmax + 1) * (n + 1)
    stats = {"pairs": pairs, "feasible_pairs": len(records), "states_per_pair": per_pair,
             "states": pairs * per_pair, "k_max": kmax, "m_max": mmax}
    return _finish(inst, mode, records, epsilon, "fptas_homog", stats,
                   [(w, lambda r: w.min() * (1 + epsilon) ** (r[0] + 1))],
                   pw, lambda r: (1 - 2 * epsilon) * pw.min() * (1 + epsilon) ** r[1])


def _finish(inst, mode, records, epsilon, method, stats, upper, pw, lower, extra=()):
    """Evaluate every recorded subset (plus ``extra`` masks) and keep the best; asserts the grid bounds."""
    if not records:
        raise RuntimeError("no bucket combination was feasible")
    for rec in records:
        bits = np.array([(rec[-1] >> i) & 1 for i in range(inst.n)], dtype=bool)
        for vals, cap in upper:
            total, bound = vals[bits].sum(), cap(rec)
            assert total <= bound * (1 + 1e-9), f"{method}: upper bound violated at {rec[:-1]}"
        total, bound = pw[bits].sum(), lower(rec)
        assert total >= bound * (1 - 1e-9), f"{method}: price bound violated at {rec[:-1]}"
    masks = np.array(sorted({rec[-1] for rec in records} | set(extra)), dtype=np.int64)
    rev = subset_revenues(inst, masks, mode)
    top = rev.max()
    tol = 1e-12 * max(1.0, abs(top))
    best = min((int(m) for m in masks[rev >= top - tol]),
               key=lambda m: (bin(m).count("1"), mask_to_subset(m)))
    stats["candidates"] = int(masks.size)
    return solution(inst, mask_to_subset(best), method, 1 - 2 * epsilon, epsilon, mode, stats)


# -- heterogeneous -------------------------------------------------------

@njit(cache=True)
def _min_card(wh, ah, bh, ph, jmax, kmax, lmax, mmax, cap):
    """Sparse min-cardinality DP; returns (mask, count, states visited).

    Only reachable states are stored. A state is keyed by its rounded sums
    (j, k, l, min(m, mmax)) and keeps the smallest count seen; on ties the
    state that skips the current item wins.
    """
    n = wh.size
    dk, dl, dm = kmax + 1, lmax + 1, mmax + 1
    keys = np.zeros(1, dtype=np.int64)
    cnt = np.zeros(1, dtype=np.int64)
    masks = np.zeros(1, dtype=np.int64)
    js = np.zeros(1, dtype=np.int64)
    ks = np.zeros(1, dtype=np.int64)
    ls = np.zeros(1, dtype=np.int64)
    ms = np.zeros(1, dtype=np.int64)
    visited = 1
    for t in range(n):
        s = keys.size
        add = 0
        for q in range(s):
            if (js[q] + wh[t] <= jmax and ks[q] + ah[t] <= kmax and ls[q] + bh[t] <= lmax
                    and cnt[q] < cap):
                add += 1
        if add == 0:
            continue
        tot = s + add
        nk = np.empty(tot, dtype=np.int64)
        nc = np.empty(tot, dtype=np.int64)
        nmask = np.empty(tot, dtype=np.int64)
        nj = np.empty(tot, dtype=np.int64)
        nkk = np.empty(tot, dtype=np.int64)
        nl = np.empty(tot, dtype=np.int64)
        nm = np.empty(tot, dtype=np.int64)
        nk[:s] = keys
        nc[:s] = cnt
        nmask[:s] = masks
        nj[:s] = js
        nkk[:s] = ks
        nl[:s] = ls
        nm[:s] = ms
        r = s
        for q in range(s):
            j2, k2, l2 = js[q] + wh[t], ks[q] + ah[t], ls[q] + bh[t]
            if j2 <= jmax and k2 <= kmax and l2 <= lmax and cnt[q] < cap:
                m2 = ms[q] + ph[t]
                if m2 > mmax:
                    m2 = mmax
                nj[r], nkk[r], nl[r], nm[r] = j2, k2, l2, m2
                nk[r] = ((j2 * dk + k2) * dl + l2) * dm + m2
                nc[r] = cnt[q] + 1
                nmask[r] = masks[q] | (1 << t)
                r += 1
        order = np.argsort(nk * (n + 2) + nc, kind="mergesort")
        keep = np.zeros(tot, dtype=np.bool_)
        last = -1
        u = 0
        for idx in order:
            if nk[idx] != last:
                keep[idx] = True
                last = nk[idx]
                u += 1
        sel = order[keep[order]]
        keys, cnt, masks = nk[sel], nc[sel], nmask[sel]
        js, ks, ls, ms = nj[sel], nkk[sel], nl[sel], nm[sel]
        visited += tot
    best_mask, best_cnt, best_key = -1, cap + 1, -1
    for q in range(keys.size):
        if ms[q] == mmax and cnt[q] > 0:
            if cnt[q] < best_cnt or (cnt[q] == best_cnt and keys[q] < best_key):
                best_mask, best_cnt, best_key = masks[q], cnt[q], keys[q]
    return best_mask, best_cnt, visited


@njit(cache=True)
def _frontier(WQ, PQ, AQ, BQ, jmax, mmax, cap):
    # G[h, i, f] = largest feasible price bucket, or -1; nondecreasing in h, i, f
    nf, ng, nh, ni = WQ.shape[0], PQ.shape[0], AQ.shape[0], BQ.shape[0]
    G = np.full((nh, ni, nf), -1, dtype=np.int64)
    rows = []
    checks, states = 0, 0
    for hi in range(nh):
        for ii in range(ni):
            for fi in range(nf):
                lb = -1
                if hi > 0 and G[hi - 1, ii, fi] > lb:
                    lb = G[hi - 1, ii, fi]
                if ii > 0 and G[hi, ii - 1, fi] > lb:
                    lb = G[hi, ii - 1, fi]
                if fi > 0 and G[hi, ii, fi - 1] > lb:
                    lb = G[hi, ii, fi - 1]
                g, best_mask = lb, -1
                while g + 1 < ng:
                    mask, _, v = _min_card(WQ[fi], AQ[hi], BQ[ii], PQ[g + 1], jmax, jmax, jmax, mmax, cap)
                    checks += 1
                    states += v
                    if mask <= 0:
                        break
                    g += 1
                    best_mask = mask
                G[hi, ii, fi] = g
                if g > lb:
                    rows.append((fi, g, hi, ii, best_mask))
    out = np.zeros((len(rows), 5), dtype=np.int64)
    for r in range(len(rows)):
        fi, g, hi, ii, m = rows[r]
        out[r, 0], out[r, 1], out[r, 2], out[r, 3], out[r, 4] = fi, g, hi, ii, m
    return out, checks, states


def fptas_hetero(inst: Instance, epsilon: float, capacity: Optional[int] = None) -> AssortmentSolution:
    """(1 - 2 eps)-approximate assortment with per-product service rates and |S| <= capacity.

    Bucket indices for the sums of w, w/mu and w/mu^2 are scanned along the
    monotone frontier of feasibility: a combination stays feasible when any of
    those buckets grows and when the price bucket shrinks. For every triple of
    buckets the scan finds the largest feasible price bucket, starting from
    the value already known for its smaller neighbors, and keeps the subset
    only where that value improves. Every combination a full scan accepts is
    dominated by a kept one.
    """
    _check_eps(epsilon)
    n = inst.n
    if capacity is None:
        capacity = n
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    if n > MAX_HETERO_N:
        raise ValueError(f"heterogeneous scheme supports at most {MAX_HETERO_N} products")
    if not inst.heterogeneous:
        raise ValueError("heterogeneous scheme needs per-product service rates")
    mode, w, p, mus = effective_arrays(inst, "hetero")
    if np.any(p <= 0):
        raise ValueError("all prices must be positive")
    pw, alpha, beta = p * w, w / mus, w / mus**2
    cap = min(capacity, n)
    jmax, mmax = grid_bounds(n, epsilon)
    ftop = bucket_count(n, w.max(), w.min(), epsilon)
    gtop = bucket_count(n, pw.max(), pw.min(), epsilon)
    htop = bucket_count(n, alpha.max(), alpha.min(), epsilon)
    itop = bucket_count(n, beta.max(), beta.min(), epsilon)

    def step(x, e):
        return epsilon * x.min() * (1 + epsilon) ** e / n

    wq = [_round_up(w, step(w, f)) for f in range(-1, ftop + 1)]
    pq = [_round_down(pw, step(pw, g)) for g in range(0, gtop + 1)]
    aq = [_round_up(alpha, step(alpha, h)) for h in range(-1, htop + 1)]
    bq = [_round_up(beta, step(beta, i)) for i in range(-1, itop + 1)]

    def vacuous(q):
        return np.sort(q)[::-1][:cap].sum() <= jmax

    h_stop = next((k for k, q in enumerate(aq) if vacuous(q)), len(aq) - 1)
    i_stop = next((k for k, q in enumerate(bq) if vacuous(q)), len(bq) - 1)

    WQ, PQ, AQ, BQ = (np.array(q) for q in (wq, pq, aq, bq))
    rec, checks, states = _frontier(WQ, PQ, AQ[: h_stop + 1], BQ[: i_stop + 1], jmax, mmax, cap)
    records = [(int(f) - 1, int(g), int(h) - 1, int(i) - 1, int(m)) for f, g, h, i, m in rec]
    stats = {"checks": int(checks), "states": int(states), "k_max": jmax, "m_max": mmax,
             "buckets": [len(wq), len(pq), len(aq), len(bq)], "scanned": [h_stop + 1, i_stop + 1]}
    upper = [
        (w, lambda r: w.min() * (1 + epsilon) ** (r[0] + 1)),
        (alpha, lambda r: alpha.min() * (1 + epsilon) ** (r[2] + 1)),
        (beta, lambda r: beta.min() * (1 + epsilon) ** (r[3] + 1)),
    ]
    # singletons are cheap to add and make the capacity-1 case exact
    sol = _finish(inst, mode, records, epsilon, "fptas_hetero", stats, upper, pw,
                  lambda r: (1 - 2 * epsilon) * pw.min() * (1 + epsilon) ** r[1],
                  extra=[1 << i for i in range(n)])
    assert len(sol.subset) <= cap
    return sol
