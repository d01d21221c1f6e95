"""Domain types, instance (de)serialization and aggregate sums.

All utilities are in natural-log units and the potential market arrival
rate is fixed at 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

MARKET_RATE = 1.0


class InstanceError(ValueError):
    """Raised when an instance violates its invariants.

    ``path`` names the offending field, e.g. ``products[2].mu``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Product:
    id: str
    r: float
    p: Optional[float] = None
    mu: Optional[float] = None
    c: Optional[float] = None

    @property
    def weight(self) -> float:
        """Logit attraction exp(r - p)."""
        if self.p is None:
            raise InstanceError(f"product {self.id!r}.p", "price is unset")
        return math.exp(self.r - self.p)


@dataclass(frozen=True)
class Instance:
    products: tuple[Product, ...]
    c: float
    mu: Optional[float] = None
    market_rate: float = MARKET_RATE

    def __post_init__(self):
        object.__setattr__(self, "products", tuple(self.products))
        validate(self)

    @property
    def n(self) -> int:
        return len(self.products)

    @property
    def heterogeneous(self) -> bool:
        return all(prod.mu is not None for prod in self.products)

    @property
    def r(self) -> np.ndarray:
        return np.array([prod.r for prod in self.products], dtype=float)

    @property
    def prices(self) -> np.ndarray:
        return np.array([np.nan if prod.p is None else prod.p for prod in self.products])

    @property
    def weights(self) -> np.ndarray:
        return np.array([prod.weight for prod in self.products])

    @property
    def service_rates(self) -> np.ndarray:
        """Per-product service rates, falling back to the global rate."""
        return np.array([self.mu if prod.mu is None else prod.mu for prod in self.products], dtype=float)

    @property
    def cost_rates(self) -> np.ndarray:
        return np.array([self.c if prod.c is None else prod.c for prod in self.products], dtype=float)

    def with_prices(self, prices: Sequence[float]) -> "Instance":
        prods = [Product(q.id, q.r, float(p), q.mu, q.c) for q, p in zip(self.products, prices)]
        return Instance(tuple(prods), self.c, self.mu, self.market_rate)


def validate(inst: Instance) -> None:
    if not inst.products:
        raise InstanceError("products", "at least one product is required")
    if not math.isfinite(inst.c) or inst.c < 0:
        raise InstanceError("c", f"waiting-cost rate must be >= 0, got {inst.c}")
    if inst.market_rate != MARKET_RATE:
        raise InstanceError("market_rate", "market rate is fixed at 1")
    if inst.mu is not None and not (math.isfinite(inst.mu) and inst.mu > 0):
        raise InstanceError("mu", f"service rate must be > 0, got {inst.mu}")
    seen = set()
    for k, prod in enumerate(inst.products):
        where = f"products[{k}]"
        if prod.id in seen:
            raise InstanceError(f"{where}.id", f"duplicate id {prod.id!r}")
        seen.add(prod.id)
        if not math.isfinite(prod.r):
            raise InstanceError(f"{where}.r", "quality must be finite")
        if prod.p is not None and not (math.isfinite(prod.p) and prod.p >= 0):
            raise InstanceError(f"{where}.p", f"price must be >= 0, got {prod.p}")
        if prod.mu is not None and not (math.isfinite(prod.mu) and prod.mu > 0):
            raise InstanceError(f"{where}.mu", f"service rate must be > 0, got {prod.mu}")
        if prod.c is not None and not (math.isfinite(prod.c) and prod.c >= 0):
            raise InstanceError(f"{where}.c", f"waiting-cost rate must be >= 0, got {prod.c}")
    has_mu = [prod.mu is not None for prod in inst.products]
    if any(has_mu) and not all(has_mu):
        raise InstanceError("products", "per-product mu must be set on all products or none")
    if not all(has_mu) and inst.mu is None:
        raise InstanceError("mu", "global service rate required when products carry no mu")


@dataclass(frozen=True)
class Aggregates:
    """Sums over an assortment: W = sum w, A = sum w/mu, B = sum w/mu^2, PW = sum p*w."""

    members: tuple[int, ...]
    W: float
    A: float
    B: float
    PW: float

    def __add__(self, other: "Aggregates") -> "Aggregates":
        return Aggregates(tuple(sorted(self.members + other.members)),
                          self.W + other.W, self.A + other.A, self.B + other.B, self.PW + other.PW)


def aggregates(inst: Instance, subset: Iterable[int], own_service: bool = False) -> Aggregates:
    """Assortment sums in ascending index order.

    With ``own_service`` each weight carries the disutility of the product's
    own service time, w_i * exp(-c / mu_i); the heterogeneous equilibrium is
    written in terms of these adjusted weights.
    """
    idx = sorted(set(int(i) for i in subset))
    W = A = B = PW = 0.0
    mus = inst.service_rates
    for i in idx:
        if not 0 <= i < inst.n:
            raise IndexError(f"product index {i} out of range for {inst.n} products")
        prod = inst.products[i]
        if prod.p is None:
            raise InstanceError(f"products[{i}].p", "price is unset")
        w = prod.weight
        if own_service:
            w *= math.exp(-inst.c / mus[i])
        W += w
        A += w / mus[i]
        B += w / mus[i] ** 2
        PW += prod.p * w
    return Aggregates(tuple(idx), W, A, B, PW)


# -- JSON ------------------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    out: dict = {"c": inst.c}
    if inst.mu is not None:
        out["mu"] = inst.mu
    out["market_rate"] = inst.market_rate
    prods = []
    for prod in inst.products:
        d: dict = {"id": prod.id, "r": prod.r}
        for key in ("p", "mu", "c"):
            val = getattr(prod, key)
            if val is not None:
                d[key] = val
        prods.append(d)
    out["products"] = prods
    return out


def _number(obj: dict, key: str, where: str, required: bool = True) -> Optional[float]:
    if key not in obj:
        if required:
            raise InstanceError(f"{where}{key}", "missing field")
        return None
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise InstanceError(f"{where}{key}", f"expected a number, got {val!r}")
    return float(val)


def instance_from_dict(obj: dict) -> Instance:
    if not isinstance(obj, dict):
        raise InstanceError("$", "instance must be a JSON object")
    c = _number(obj, "c", "")
    mu = _number(obj, "mu", "", required=False)
    market = _number(obj, "market_rate", "", required=False)
    raw = obj.get("products")
    if not isinstance(raw, list):
        raise InstanceError("products", "expected a list")
    prods = []
    for k, item in enumerate(raw):
        where = f"products[{k}]."
        if not isinstance(item, dict):
            raise InstanceError(f"products[{k}]", "expected an object")
        pid = item.get("id", str(k))
        if not isinstance(pid, str):
            raise InstanceError(f"{where}id", "expected a string")
        prods.append(Product(pid, _number(item, "r", where),
                             _number(item, "p", where, False),
                             _number(item, "mu", where, False),
                             _number(item, "c", where, False)))
    return Instance(tuple(prods), c, mu, MARKET_RATE if market is None else market)


def dumps(obj) -> str:
    """Deterministic JSON; floats use Python's shortest round-trip repr."""
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def load_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError("$", f"invalid JSON: {exc}") from exc
    return instance_from_dict(obj)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def random_instance(rng: np.random.Generator, n: int, mu=None, c=None, hetero: bool = False,
                    r_range=(0.0, 1.0), p_range=(0.5, 2.0), mu_range=(0.5, 2.0)) -> Instance:
    """Random priced instance used by tests and demos."""
    r = rng.uniform(*r_range, size=n)
    p = rng.uniform(*p_range, size=n)
    if c is None:
        c = float(rng.uniform(0.0, 1.0))
    prods = []
    mus = rng.uniform(*mu_range, size=n) if hetero else [None] * n
    for i in range(n):
        prods.append(Product(f"p{i}", float(r[i]), float(p[i]), None if mus[i] is None else float(mus[i])))
    if mu is None and not hetero:
        mu = float(rng.uniform(0.3, 2.0))
    return Instance(tuple(prods), float(c), None if hetero else float(mu))


__all__ = [
    "MARKET_RATE", "InstanceError", "Product", "Instance", "Aggregates", "aggregates",
    "instance_to_dict", "instance_from_dict", "load_instance", "save_instance", "dumps",
    "random_instance",
]
