"""Market model for two service providers sharing one band.

SP1 covers sub-markets A\\B and AB, SP2 covers AB and B\\A. Demand in each
sub-market is linear with intercept 1 and slope ``1/m`` (``m`` the sub-market
size), the sizes sum to one, and congestion adds a latency cost equal to the
interfering traffic divided by the shared bandwidth ``W``.

All functions here are pure and closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, FeasibilityError

SIZE_SUM_TOL = 1e-12
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class MarketConfig:
    """Sub-market sizes and shared bandwidth.

    Attributes:
        m_a: size of A\\B (covered only by SP1)
        m_ab: size of the overlap AB
        m_b: size of B\\A (covered only by SP2)
        W: shared bandwidth
    """

    m_a: float
    m_ab: float
    m_b: float
    W: float

    def __post_init__(self):
        for name in ("m_a", "m_ab", "m_b", "W"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
        if self.W <= 0:
            raise ConfigError(f"bandwidth W must be positive, got {self.W}")
        for name in ("m_a", "m_ab", "m_b"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative, got {getattr(self, name)}")
        total = self.m_a + self.m_ab + self.m_b
        if abs(total - 1.0) > SIZE_SUM_TOL:
            raise ConfigError(f"sub-market sizes must sum to 1, got {total!r}")

    @property
    def is_symmetric(self) -> bool:
        return abs(self.m_a - self.m_b) <= 1e-12

    def with_bandwidth(self, W: float) -> "MarketConfig":
        return MarketConfig(self.m_a, self.m_ab, self.m_b, W)


@dataclass(frozen=True)
class Allocation:
    """Quantities served, ordered (x1_a, x1_ab, x2_ab, x2_b)."""

    x1_a: float = 0.0
    x1_ab: float = 0.0
    x2_ab: float = 0.0
    x2_b: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1_a, self.x1_ab, self.x2_ab, self.x2_b], dtype=float)

    @classmethod
    def from_array(cls, x) -> "Allocation":
        x1_a, x1_ab, x2_ab, x2_b = (float(v) for v in x)
        return cls(x1_a, x1_ab, x2_ab, x2_b)

    def sp_quantities(self, sp: int) -> tuple[float, float]:
        """Return ``(dedicated, overlap)`` quantities of SP ``sp``."""
        if sp == 1:
            return self.x1_a, self.x1_ab
        if sp == 2:
            return self.x2_b, self.x2_ab
        raise ValueError(f"sp must be 1 or 2, got {sp}")

    def with_sp(self, sp: int, dedicated: float, overlap: float) -> "Allocation":
        if sp == 1:
            return Allocation(dedicated, overlap, self.x2_ab, self.x2_b)
        if sp == 2:
            return Allocation(self.x1_a, self.x1_ab, overlap, dedicated)
        raise ValueError(f"sp must be 1 or 2, got {sp}")


@dataclass(frozen=True)
class MarketOutcome:
    """Everything the model reports for one allocation."""

    p_a: float
    p_ab: float
    p_b: float
    l_a: float
    l_ab: float
    l_b: float
    s_a: float
    s_ab: float
    s_b: float
    r1: float
    r2: float
    cs_a: float
    cs_ab: float
    cs_b: float
    cs_total: float
    welfare: float

    @property
    def revenue_total(self) -> float:
        return self.r1 + self.r2

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _clamp(value: float, lo: float, hi: float, constraint: int, label: str) -> float:
    if value < lo - FEAS_TOL or value > hi + FEAS_TOL:
        raise FeasibilityError(constraint, f"{label} = {value!r} outside [{lo!r}, {hi!r}]")
    return min(max(value, lo), hi)


def check_feasible(alloc: Allocation, cfg: MarketConfig) -> Allocation:
    """Validate ``alloc`` against the coverage constraints.

    Violations within 1e-9 are clamped onto the feasible set; larger ones
    raise :class:`FeasibilityError` naming the constraint.
    """
    x1_a = _clamp(alloc.x1_a, 0.0, cfg.m_a, 1, "x1_a")
    x1_ab = _clamp(alloc.x1_ab, 0.0, cfg.m_ab, 2, "x1_ab")
    x2_ab = _clamp(alloc.x2_ab, 0.0, cfg.m_ab, 2, "x2_ab")
    total_ab = _clamp(x1_ab + x2_ab, 0.0, cfg.m_ab, 2, "x1_ab + x2_ab")
    if x1_ab + x2_ab > total_ab:
        # scale back the tolerated overshoot proportionally
        scale = total_ab / (x1_ab + x2_ab)
        x1_ab, x2_ab = x1_ab * scale, x2_ab * scale
    x2_b = _clamp(alloc.x2_b, 0.0, cfg.m_b, 3, "x2_b")
    return Allocation(x1_a, x1_ab, x2_ab, x2_b)


def _price(quantity: float, size: float) -> float:
    if size == 0.0:
        return 1.0
    return 1.0 - quantity / size


def delivered_prices(alloc: Allocation, cfg: MarketConfig) -> tuple[float, float, float]:
    """Market-clearing prices ``(p_a, p_ab, p_b)``.

    An empty sub-market (size 0) reports price 1.
    """
    x = check_feasible(alloc, cfg)
    return (
        _price(x.x1_a, cfg.m_a),
        _price(x.x1_ab + x.x2_ab, cfg.m_ab),
        _price(x.x2_b, cfg.m_b),
    )


def latency_costs(alloc: Allocation, cfg: MarketConfig) -> tuple[float, float, float]:
    """Congestion costs ``(l_a, l_ab, l_b)``.

    Users in A\\B see all traffic within range of AP1, users in B\\A all
    traffic within range of AP2, and users in AB see everything.
    """
    if not cfg.W > 0:
        raise ConfigError(f"bandwidth W must be positive, got {cfg.W}")
    x = check_feasible(alloc, cfg)
    overlap = x.x1_ab + x.x2_ab
    return (
        (x.x1_a + overlap) / cfg.W,
        (x.x1_a + overlap + x.x2_b) / cfg.W,
        (overlap + x.x2_b) / cfg.W,
    )


def revenues(alloc: Allocation, cfg: MarketConfig) -> tuple[float, float]:
    """Revenues ``(r1, r2)``; service prices may be negative and are not clamped."""
    x = check_feasible(alloc, cfg)
    p_a, p_ab, p_b = delivered_prices(x, cfg)
    l_a, l_ab, l_b = latency_costs(x, cfg)
    r1 = x.x1_a * (p_a - l_a) + x.x1_ab * (p_ab - l_ab)
    r2 = x.x2_b * (p_b - l_b) + x.x2_ab * (p_ab - l_ab)
    return r1, r2


def _surplus(quantity: float, size: float) -> float:
    if size == 0.0:
        return 0.0
    return quantity * quantity / (2.0 * size)


def consumer_surplus(alloc: Allocation, cfg: MarketConfig) -> tuple[float, float, float, float]:
    """Consumer surplus ``(cs_a, cs_ab, cs_b, cs_total)``."""
    x = check_feasible(alloc, cfg)
    cs_a = _surplus(x.x1_a, cfg.m_a)
    cs_ab = _surplus(x.x1_ab + x.x2_ab, cfg.m_ab)
    cs_b = _surplus(x.x2_b, cfg.m_b)
    return cs_a, cs_ab, cs_b, cs_a + cs_ab + cs_b


def sp_revenue(alloc: Allocation, cfg: MarketConfig, sp: int) -> float:
    r1, r2 = revenues(alloc, cfg)
    return r1 if sp == 1 else r2


def evaluate(alloc: Allocation, cfg: MarketConfig) -> MarketOutcome:
    """Evaluate prices, latencies, revenues, surplus and welfare at ``alloc``."""
    x = check_feasible(alloc, cfg)
    p_a, p_ab, p_b = delivered_prices(x, cfg)
    l_a, l_ab, l_b = latency_costs(x, cfg)
    r1, r2 = revenues(x, cfg)
    cs_a, cs_ab, cs_b, cs_total = consumer_surplus(x, cfg)
    return MarketOutcome(
        p_a=p_a,
        p_ab=p_ab,
        p_b=p_b,
        l_a=l_a,
        l_ab=l_ab,
        l_b=l_b,
        s_a=p_a - l_a,
        s_ab=p_ab - l_ab,
        s_b=p_b - l_b,
        r1=r1,
        r2=r2,
        cs_a=cs_a,
        cs_ab=cs_ab,
        cs_b=cs_b,
        cs_total=cs_total,
        welfare=cs_total + r1 + r2,
    )
