"""Discrete-event simulation of the service system, used to cross-check formulas.

Three modes share one output analysis:

* ``fifo``: Poisson market arrivals at rate 1 join class i with probability
  lambda_i and are served first-come first-served;
* ``priority``: the same arrivals under preemptive-resume priority;
* ``disclosure``: a customer who finds l people joins with probability
  rate(l), served first-come first-served at rate mu.

Standard errors come from batch means (20 batches after a 10% warmup).
Randomness is drawn up front from a Philox stream keyed by seed XOR
replication index, so every replication is reproducible on its own.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy import stats

MODES = ("fifo", "priority", "disclosure")
N_STATES = 64
Z_LIMIT = 3.0
# two-sided coverage of a +-3 sigma band under a normal law
COVERAGE = math.erf(Z_LIMIT / math.sqrt(2))


@dataclass
class SimConfig:
    mode: str
    horizon: float
    lam: Sequence[float] = ()
    mu: Sequence[float] | float = 1.0
    order: Optional[Sequence[int]] = None
    state_rates: Sequence[float] = ()
    tail_rate: float = 0.0
    warmup: Optional[float] = None
    seed: int = 0
    replications: int = 1
    batches: int = 20

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.warmup is None:
            self.warmup = 0.1 * self.horizon
        if not self.horizon > self.warmup >= 0:
            raise ValueError("need horizon > warmup >= 0")
        if self.replications < 1 or self.batches < 2:
            raise ValueError("need replications >= 1 and batches >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.mode == "disclosure":
            rates = np.asarray(self.state_rates, dtype=float)
            if np.any(rates < 0) or np.any(rates > 1) or not 0 <= self.tail_rate <= 1:
                raise ValueError("state joining rates must lie in [0, 1]")
            if self.tail_rate >= self.mu_array(1)[0]:
                raise ValueError("tail joining rate must be below mu")
        else:
            lam = np.asarray(self.lam, dtype=float)
            if lam.ndim != 1 or lam.size == 0 or np.any(lam < 0) or lam.sum() >= 1:
                raise ValueError("class rates must be nonnegative with total below 1")
            mu = self.mu_array(lam.size)
            if np.sum(lam / mu) >= 1:
                raise ValueError("offered load must be below 1")
            if self.order is not None and sorted(self.order) != list(range(lam.size)):
                raise ValueError("order must be a permutation of the classes")

    def mu_array(self, n: int) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if mu.size == 1:
            mu = np.full(n, mu[0])
        if mu.size != n or np.any(mu <= 0):
            raise ValueError("mu must be positive, one value or one per class")
        return mu


@dataclass
class Check:
    name: str
    estimate: float
    se: float
    reference: float
    z: float
    passed: bool
    limit: float = Z_LIMIT


@dataclass
class SimReport:
    mode: str
    seed: int
    replications: int
    events: int
    join_rates: list
    join_rates_se: list
    sojourn: list
    sojourn_se: list
    mean_in_system: float
    throughput: float
    occupancy: list = field(default_factory=list)
    occupancy_se: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    batch_means: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def failures(self) -> list:
        return [ch.name for ch in self.checks if not ch.passed]

    def as_dict(self) -> dict:
        out = asdict(self)
        out.pop("batch_means")
        out["passed"] = self.passed
        return _finite(out)

    def batch_csv(self) -> str:
        keys = list(self.batch_means)
        rows = [",".join(["batch"] + keys)]
        for b in range(len(self.batch_means[keys[0]]) if keys else 0):
            rows.append(",".join([str(b)] + [repr(float(self.batch_means[k][b])) for k in keys]))
        return "\n".join(rows) + "\n"


def _finite(obj):
    # JSON has no NaN; missing estimates become null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


# -- kernels -------------------------------------------------------------

@njit(cache=True)
def _add_area(area, t0, t1, level, warmup, blen, nb):
    if level == 0 or t1 <= warmup:
        return
    lo = max(t0, warmup)
    end = warmup + blen * nb
    if t1 > end:
        t1 = end
    while lo < t1:
        b = int((lo - warmup) / blen)
        if b >= nb:
            return
        edge = warmup + (b + 1) * blen
        hi = t1 if t1 < edge else edge
        area[b] += level * (hi - lo)
        lo = hi


@njit(cache=True)
def _pick(u, cum):
    for i in range(cum.size):
        if u < cum[i]:
            return i
    return -1


@njit(cache=True)
def _fifo(inter, u, svc, cum, mus, horizon, warmup, nb):
    n = cum.size
    blen = (horizon - warmup) / nb
    count = np.zeros((nb, n))
    soj = np.zeros((nb, n))
    area = np.zeros(nb)
    t = 0.0
    free_at = 0.0
    events = 0
    for q in range(inter.size):
        t += inter[q]
        if t >= horizon:
            return count, soj, area, events, False
        events += 1
        i = _pick(u[q], cum)
        if i < 0:
            continue
        start = t if t > free_at else free_at
        free_at = start + svc[q] / mus[i]
        events += 1
        _add_area(area, t, free_at, 1.0, warmup, blen, nb)
        if t >= warmup:
            b = int((t - warmup) / blen)
            count[b, i] += 1
            soj[b, i] += free_at - t
    return count, soj, area, events, True


@njit(cache=True)
def _priority(inter, u, svc, cum, mus, pos, horizon, warmup, nb):
    # preemptive-resume; pos[i] is the priority position of class i (0 = top)
    n = cum.size
    blen = (horizon - warmup) / nb
    count = np.zeros((nb, n))
    soj = np.zeros((nb, n))
    area = np.zeros(nb)
    m = inter.size
    arr = np.empty(m)
    rem = np.empty(m)
    cls = np.empty(m, dtype=np.int64)
    nxt = np.full(m, -1, dtype=np.int64)
    head = np.full(n, -1, dtype=np.int64)
    tail = np.full(n, -1, dtype=np.int64)
    t = 0.0
    ta = inter[0]
    q = 0
    jobs = 0
    insys = 0
    events = 0
    while True:
        top = -1
        for p in range(n):
            if head[p] >= 0:
                top = p
                break
        arriving = ta < horizon
        if top < 0 and not arriving:
            break
        if top >= 0:
            j = head[top]
            done = t + rem[j]
            if not arriving or done <= ta:
                _add_area(area, t, done, insys, warmup, blen, nb)
                t = done
                head[top] = nxt[j]
                if head[top] < 0:
                    tail[top] = -1
                insys -= 1
                events += 1
                if arr[j] >= warmup:
                    b = int((arr[j] - warmup) / blen)
                    count[b, cls[j]] += 1
                    soj[b, cls[j]] += t - arr[j]
                continue
            rem[j] -= ta - t
        _add_area(area, t, ta, insys, warmup, blen, nb)
        t = ta
        events += 1
        i = _pick(u[q], cum)
        if i >= 0:
            arr[jobs] = t
            rem[jobs] = svc[q] / mus[i]
            cls[jobs] = i
            p = pos[i]
            if tail[p] >= 0:
                nxt[tail[p]] = jobs
            else:
                head[p] = jobs
            tail[p] = jobs
            jobs += 1
            insys += 1
        q += 1
        if q >= m:
            return count, soj, area, events, True
        ta = t + inter[q]
    return count, soj, area, events, False


@njit(cache=True)
def _disclosure(expo, u, rates, tail, mu, horizon, warmup, nb, nstates):
    blen = (horizon - warmup) / nb
    occ = np.zeros((nb, nstates))
    joins = np.zeros(nb)
    count = np.zeros(nb)
    soj = np.zeros(nb)
    area = np.zeros(nb)
    m = expo.size
    arr = np.empty(m)
    head = 0
    qtail = 0
    level = 0
    t = 0.0
    events = 0
    for q in range(m):
        arriving = t < horizon
        if not arriving and level == 0:
            return occ, joins, count, soj, area, events, False
        total = (1.0 if arriving else 0.0) + (mu if level > 0 else 0.0)
        dt = expo[q] / total
        t_next = t + dt
        if arriving and t_next > horizon:
            t_next = horizon
            s = level if level < nstates else nstates - 1
            _add_area(occ[:, s], t, t_next, 1.0, warmup, blen, nb)
            _add_area(area, t, t_next, level, warmup, blen, nb)
            t = t_next
            continue
        s = level if level < nstates else nstates - 1
        _add_area(occ[:, s], t, t_next, 1.0, warmup, blen, nb)
        _add_area(area, t, t_next, level, warmup, blen, nb)
        t = t_next
        events += 1
        if arriving and u[q] * total < 1.0:
            r = rates[level] if level < rates.size else tail
            # second use of the same uniform, rescaled to [0, 1)
            if u[q] * total < r:
                arr[qtail] = t
                qtail += 1
                level += 1
                if t >= warmup:
                    joins[int((t - warmup) / blen)] += 1
        else:
            a = arr[head]
            head += 1
            level -= 1
            if a >= warmup:
                b = int((a - warmup) / blen)
                count[b] += 1
                soj[b] += t - a
    return occ, joins, count, soj, area, events, True


# -- driver ----------------------------------------------------------------

def _stream(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, rep], dtype=np.uint64)))


def _run_one(cfg: SimConfig, rep: int):
    size = int(cfg.horizon + 10 * math.sqrt(cfg.horizon) + 100)
    grow = 1
    mu = cfg.mu_array(1 if cfg.mode == "disclosure" else len(cfg.lam))
    while True:
        rng = _stream(cfg.seed, rep)
        if cfg.mode == "disclosure":
            rate = 1.0 + mu[0]
            m = int(rate * cfg.horizon + 10 * math.sqrt(rate * cfg.horizon) + 100) * 2 * grow
            out = _disclosure(rng.standard_exponential(m), rng.random(m),
                              np.asarray(cfg.state_rates, dtype=float), float(cfg.tail_rate), float(mu[0]),
                              float(cfg.horizon), float(cfg.warmup), cfg.batches, N_STATES)
        else:
            inter = rng.standard_exponential(size)
            u = rng.random(size)
            svc = rng.standard_exponential(size)
            cum = np.cumsum(np.asarray(cfg.lam, dtype=float))
            if cfg.mode == "fifo":
                out = _fifo(inter, u, svc, cum, mu, float(cfg.horizon), float(cfg.warmup), cfg.batches)
            else:
                order = list(range(len(cfg.lam))) if cfg.order is None else list(cfg.order)
                pos = np.empty(len(order), dtype=np.int64)
                pos[order] = np.arange(len(order))
                out = _priority(inter, u, svc, cum, mu, pos, float(cfg.horizon), float(cfg.warmup), cfg.batches)
        if not out[-1]:
            return out[:-1]
        # ran out of pre-drawn variates; draw a longer stream
        size *= 2
        grow *= 2


def _mean_se(x: np.ndarray):
    """Mean and batch-means standard error along axis 0."""
    k = x.shape[0]
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros_like(mean)
    return mean, se


def _ratio_se(num: np.ndarray, den: np.ndarray):
    # ratio estimator over batches with delta-method standard error
    tot_n, tot_d = num.sum(axis=0), den.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = tot_n / tot_d
        k = num.shape[0]
        resid = num - r * den
        se = np.sqrt(k / (k - 1) * np.sum(resid**2, axis=0)) / tot_d
    return r, se


def critical_value(batches: int) -> float:
    """Student-t cutoff with the coverage of a 3-sigma band; the se comes from ``batches`` batch means."""
    return float(stats.t.ppf(0.5 + COVERAGE / 2, batches - 1))


def _check(name, est, se, ref, floor, limit):
    se_eff = max(float(se), floor)
    z = (est - ref) / se_eff if math.isfinite(est) else math.nan
    ok = (not math.isfinite(est) and ref == 0) or (math.isfinite(z) and abs(z) <= limit)
    return Check(name, float(est), float(se), float(ref), float(z), bool(ok), limit)


def simulate(cfg: SimConfig, reference: Optional[dict] = None) -> SimReport:
    """Run all replications, pool their batches and compare with ``reference``.

    Reference keys: ``rates`` and ``sojourn`` (per class) for fifo/priority;
    ``probs`` (P_0..P_m) and ``throughput`` for disclosure.
    """
    reference = reference or {}
    runs = [_run_one(cfg, rep) for rep in range(cfg.replications)]
    blen = (cfg.horizon - cfg.warmup) / cfg.batches
    floor = 1e-12
    limit = critical_value(cfg.batches * cfg.replications)
    checks = []
    if cfg.mode == "disclosure":
        occ = np.concatenate([r[0] for r in runs]) / blen
        joins = np.concatenate([r[1] for r in runs])
        count = np.concatenate([r[2] for r in runs])[:, None]
        soj = np.concatenate([r[3] for r in runs])[:, None]
        area = np.concatenate([r[4] for r in runs])
        events = sum(int(r[5]) for r in runs)
        P, P_se = _mean_se(occ)
        thr, thr_se = _mean_se(joins / blen)
        rates, rates_se = np.array([thr]), np.array([thr_se])
        probs_ref = np.asarray(reference.get("probs", []), dtype=float)
        for l, ref in enumerate(probs_ref):
            # rare states may never be visited within a batch; fall back to a binomial error
            binom = math.sqrt(ref * (1 - ref) / max(events, 1))
            checks.append(_check(f"P{l}", P[l], P_se[l], ref, max(floor, binom), limit))
        if "throughput" in reference:
            checks.append(_check("throughput", thr, thr_se, reference["throughput"], floor, limit))
    else:
        count = np.concatenate([r[0] for r in runs])
        soj = np.concatenate([r[1] for r in runs])
        area = np.concatenate([r[2] for r in runs])
        events = sum(int(r[3]) for r in runs)
        rates, rates_se = _mean_se(count / blen)
        P, P_se = np.zeros(0), np.zeros(0)
        for i, ref in enumerate(reference.get("rates", [])):
            checks.append(_check(f"rate[{i}]", rates[i], rates_se[i], ref, floor, limit))
    mean_soj, soj_se = _ratio_se(soj, count)
    for i, ref in enumerate(reference.get("sojourn", [])):
        if count[:, i].sum() == 0:
            checks.append(Check(f"sojourn[{i}]", math.nan, math.nan, float(ref), math.nan, True, limit))
            continue
        checks.append(_check(f"sojourn[{i}]", mean_soj[i], soj_se[i], ref, floor, limit))
    # Little's law per batch: time-average number in system vs (arrivals / time) x mean sojourn
    L_b = area / blen
    little = L_b - soj.sum(axis=1) / blen
    diff, diff_se = _mean_se(little)
    L, _ = _mean_se(L_b)
    total_count = count.sum()
    if total_count > 0:
        checks.append(_check("little", float(diff), float(diff_se), 0.0, floor, limit))
    batch_means = {"in_system": L_b, "joins": count.sum(axis=1) / blen}
    with np.errstate(invalid="ignore", divide="ignore"):
        batch_means["sojourn"] = soj.sum(axis=1) / count.sum(axis=1)
    return SimReport(cfg.mode, cfg.seed, cfg.replications, events,
                     rates.tolist(), rates_se.tolist(), mean_soj.tolist(), soj_se.tolist(),
                     float(L), float(count.sum() / (blen * count.shape[0])),
                     P.tolist(), P_se.tolist(), checks, batch_means)


def calibrate(cfg: SimConfig, reference: dict, runs: int = 100) -> dict:
    """Failures per check across independent single-replication runs."""
    fails: dict = {}
    for k in range(runs):
        one = SimConfig(**{**asdict(cfg), "seed": cfg.seed + k, "replications": 1})
        for ch in simulate(one, reference).checks:
            fails[ch.name] = fails.get(ch.name, 0) + (not ch.passed)
    return fails


# -- analytic references -------------------------------------------------

def fifo_setup(inst, horizon: float, seed: int = 0, **kw) -> tuple[SimConfig, dict]:
    """Config and reference for the equilibrium of ``inst`` (all products offered)."""
    from .equilibrium import equilibrium

    eq = equilibrium(inst)
    cfg = SimConfig("fifo", horizon, lam=eq.lam_i.tolist(), mu=inst.service_rates.tolist(), seed=seed, **kw)
    return cfg, {"rates": eq.lam_i.tolist(), "sojourn": eq.system_times.tolist()}


def priority_setup(lam, mu, order, horizon: float, seed: int = 0, **kw) -> tuple[SimConfig, dict]:
    from .priority import priority_waits

    waits = priority_waits(order, lam, mu)
    cfg = SimConfig("priority", horizon, lam=list(lam), mu=list(mu), order=list(order), seed=seed, **kw)
    return cfg, {"rates": list(lam), "sojourn": waits.tolist()}


def disclosure_setup(W: float, mu: float, c: float, k: Optional[int], horizon: float, seed: int = 0,
                     n_probs: int = 11, **kw) -> tuple[SimConfig, dict]:
    """Threshold-k chain (``k=None``: full disclosure) and its analytic P_0..P_{n_probs-1}."""
    from .disclosure import threshold_chain

    chain = threshold_chain(W, mu, c, k)
    if k is None:
        rates, tail = chain.join_rates, 0.0
    else:
        rates, tail = chain.join_rates, chain.tail_rate
    cfg = SimConfig("disclosure", horizon, mu=mu, state_rates=np.asarray(rates).tolist(), tail_rate=float(tail),
                    seed=seed, **kw)
    probs = [chain.prob(l) for l in range(n_probs)]
    return cfg, {"probs": probs, "throughput": chain.throughput}
