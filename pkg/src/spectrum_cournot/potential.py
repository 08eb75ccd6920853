"""Exact potential of the two-SP game and its quadratic form.

The potential is ``phi(x) = -x^T A x + 1^T x`` over the stacked vector
``x = (x1_a, x1_ab, x2_ab, x2_b)``. A unilateral change of either SP moves
``phi`` by exactly that SP's revenue change, so best responses climb ``phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NotApplicableError
from .model import Allocation, MarketConfig, sp_revenue

ORDERING = ("x1_a", "x1_ab", "x2_ab", "x2_b")
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class PotentialForm:
    """Quadratic coefficient matrix ``A`` in the order of :data:`ORDERING`."""

    A: np.ndarray
    ordering: tuple[str, ...] = ORDERING

    def value(self, alloc: Allocation) -> float:
        x = alloc.as_array()
        return float(-x @ self.A @ x + x.sum())


def _require_positive_sizes(cfg: MarketConfig) -> None:
    for name in ("m_a", "m_ab", "m_b"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"potential form requires positive sizes; {name} = {getattr(cfg, name)}")


def build_matrix(cfg: MarketConfig) -> PotentialForm:
    _require_positive_sizes(cfg)
    iw = 1.0 / cfg.W
    ia, iab, ib = 1.0 / cfg.m_a, 1.0 / cfg.m_ab, 1.0 / cfg.m_b
    A = np.array(
        [
            [ia + iw, iw, iw / 2, 0.0],
            [iw, iab + iw, (iab + iw) / 2, iw / 2],
            [iw / 2, (iab + iw) / 2, iab + iw, iw],
            [0.0, iw / 2, iw, ib + iw],
        ]
    )
    return PotentialForm(A)


def potential_value(alloc: Allocation, cfg: MarketConfig) -> float:
    """Potential evaluated term by term (no feasibility check)."""
    _require_positive_sizes(cfg)
    u, v, a, b = alloc.x1_a, alloc.x1_ab, alloc.x2_ab, alloc.x2_b
    W = cfg.W
    quad = (
        (1 / cfg.m_a + 1 / W) * u * u
        + (1 / cfg.m_ab + 1 / W) * v * v
        + (1 / cfg.m_ab + 1 / W) * a * a
        + (1 / cfg.m_b + 1 / W) * b * b
        + (1 / cfg.m_ab + 1 / W) * v * a
        + 2 / W * u * v
        + 1 / W * u * a
        + 1 / W * b * v
        + 2 / W * b * a
    )
    return -quad + u + b + v + a


def leading_pivots(A: np.ndarray) -> list[float]:
    """Pivots of an unpivoted Cholesky (LDL^T) sweep.

    The k-th pivot equals the ratio of the k-th to the (k-1)-th leading
    principal minor, so all pivots are positive iff all minors are. The sweep
    stops at the first non-positive pivot.
    """
    M = np.array(A, dtype=float)
    n = M.shape[0]
    pivots = []
    for k in range(n):
        d = M[k, k]
        pivots.append(float(d))
        if d <= PIVOT_TOL:
            break
        col = M[k + 1 :, k] / d
        M[k + 1 :, k + 1 :] -= np.outer(col, M[k, k + 1 :])
    return pivots


def is_positive_definite(form: PotentialForm) -> bool:
    pivots = leading_pivots(form.A)
    return len(pivots) == form.A.shape[0] and all(p > PIVOT_TOL for p in pivots)


def potential_identity_check(
    alloc: Allocation, deviation: Allocation, which_sp: int, cfg: MarketConfig
) -> float:
    """Gap between the potential change and the deviating SP's revenue change.

    Raises:
        NotApplicableError: if ``deviation`` moves the other SP's quantities.
    """
    if which_sp not in (1, 2):
        raise ValueError(f"which_sp must be 1 or 2, got {which_sp}")
    other = 2 if which_sp == 1 else 1
    if alloc.sp_quantities(other) != deviation.sp_quantities(other):
        raise NotApplicableError(f"deviation changes SP{other}'s quantities; only SP{which_sp} may move")
    d_phi = potential_value(deviation, cfg) - potential_value(alloc, cfg)
    d_rev = sp_revenue(deviation, cfg, which_sp) - sp_revenue(alloc, cfg, which_sp)
    return abs(d_phi - d_rev)
