"""Nash equilibria of the two-SP game.

Three routes are provided: the closed form for symmetric markets, exact
best-response iteration for any market, and the cooperation counterfactual
where both SPs stay out of the overlap. :func:`verify_nash` checks any profile
against exact best responses, and :func:`lemma_deviation` builds the
profitable deviations that rule out boundary profiles.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NotApplicableError, SolverError
from .model import Allocation, MarketConfig, MarketOutcome, check_feasible, evaluate, sp_revenue

logger = logging.getLogger(__name__)

STEP_TOL = 1e-12
NASH_TOL = 1e-8
MAX_ITER = 100_000
POSITIVE_TOL = 1e-10
KKT_TOL = 1e-12
TIE_TOL = 1e-14


class Regime(enum.Enum):
    DEDICATED_ONLY = "dedicated_only"
    SP1_IN_OVERLAP = "sp1_in_overlap"
    SP2_IN_OVERLAP = "sp2_in_overlap"
    BOTH_IN_OVERLAP = "both_in_overlap"

    @classmethod
    def of(cls, alloc: Allocation) -> "Regime":
        in1 = alloc.x1_ab > POSITIVE_TOL
        in2 = alloc.x2_ab > POSITIVE_TOL
        if in1 and in2:
            return cls.BOTH_IN_OVERLAP
        if in1:
            return cls.SP1_IN_OVERLAP
        if in2:
            return cls.SP2_IN_OVERLAP
        return cls.DEDICATED_ONLY


class Method(enum.Enum):
    CLOSED_FORM_SYMMETRIC = "closed_form_symmetric"
    NUMERIC_POTENTIAL = "numeric_potential"
    COOPERATION = "cooperation"


@dataclass(frozen=True)
class EquilibriumResult:
    alloc: Allocation
    outcome: MarketOutcome
    regime: Regime
    method: Method
    residual: float
    iterations: int = 0


@dataclass(frozen=True)
class BestResponseProblem:
    """One SP's revenue maximization with the opponent held fixed.

    Attributes:
        sp: the responding SP, 1 or 2
        opponent: the other SP's ``(dedicated, overlap)`` quantities
        cfg: market configuration
    """

    sp: int
    opponent: tuple[float, float]
    cfg: MarketConfig

    def __post_init__(self):
        if self.sp not in (1, 2):
            raise ValueError(f"sp must be 1 or 2, got {self.sp}")
        opp_ded, opp_ovl = self.opponent
        opp_size = self.cfg.m_b if self.sp == 1 else self.cfg.m_a
        if not (-1e-9 <= opp_ded <= opp_size + 1e-9 and -1e-9 <= opp_ovl <= self.cfg.m_ab + 1e-9):
            raise ValueError(f"infeasible opponent quantities {self.opponent}")

    def profile(self, dedicated: float, overlap: float) -> Allocation:
        opp_ded, opp_ovl = self.opponent
        if self.sp == 1:
            return Allocation(dedicated, overlap, opp_ovl, opp_ded)
        return Allocation(opp_ded, opp_ovl, overlap, dedicated)


def _quadratic(problem: BestResponseProblem):
    """Coefficients of the SP's revenue as a concave quadratic in (d, o).

    revenue = -(alpha d^2 + beta o^2 + 2 gamma d o) + g_d d + g_o o
    """
    cfg = problem.cfg
    opp_ded, opp_ovl = problem.opponent
    opp_ovl = max(opp_ovl, 0.0)
    opp_ded = max(opp_ded, 0.0)
    m_own = cfg.m_a if problem.sp == 1 else cfg.m_b
    iw = 1.0 / cfg.W
    alpha = (1.0 / m_own if m_own > 0 else 0.0) + iw
    beta = (1.0 / cfg.m_ab if cfg.m_ab > 0 else 0.0) + iw
    gamma = iw
    g_d = 1.0 - opp_ovl * iw
    g_o = 1.0 - (opp_ovl / cfg.m_ab if cfg.m_ab > 0 else 0.0) - (opp_ovl + opp_ded) * iw
    d_hi = m_own
    o_hi = max(cfg.m_ab - opp_ovl, 0.0)
    return alpha, beta, gamma, g_d, g_o, d_hi, o_hi


def best_response(problem: BestResponseProblem) -> tuple[tuple[float, float], float]:
    """Exact best response by KKT enumeration over the box constraints.

    Each of the two own variables sits at its lower bound, its upper bound or
    is free, giving at most nine candidates. The objective is strictly
    concave, so exactly one candidate satisfies the KKT conditions; ties
    within 1e-14 go to the candidate with fewer active bounds.

    Returns:
        ``((dedicated, overlap), revenue)`` for the responding SP.
    """
    alpha, beta, gamma, g_d, g_o, d_hi, o_hi = _quadratic(problem)

    def objective(d, o):
        return -(alpha * d * d + beta * o * o + 2 * gamma * d * o) + g_d * d + g_o * o

    d_states = ("lo", "hi", "free") if d_hi > 0 else ("lo",)
    o_states = ("lo", "hi", "free") if o_hi > 0 else ("lo",)
    candidates = []
    for sd, so in itertools.product(d_states, o_states):
        d = {"lo": 0.0, "hi": d_hi}.get(sd)
        o = {"lo": 0.0, "hi": o_hi}.get(so)
        if sd == "free" and so == "free":
            det = 4 * (alpha * beta - gamma * gamma)
            d = (2 * beta * g_d - 2 * gamma * g_o) / det
            o = (2 * alpha * g_o - 2 * gamma * g_d) / det
        elif sd == "free":
            d = (g_d - 2 * gamma * o) / (2 * alpha)
        elif so == "free":
            o = (g_o - 2 * gamma * d) / (2 * beta)
        if not (-KKT_TOL <= d <= d_hi + KKT_TOL and -KKT_TOL <= o <= o_hi + KKT_TOL):
            continue
        d = min(max(d, 0.0), d_hi)
        o = min(max(o, 0.0), o_hi)
        grad_d = g_d - 2 * alpha * d - 2 * gamma * o
        grad_o = g_o - 2 * beta * o - 2 * gamma * d
        kkt = True
        for state, grad in ((sd, grad_d), (so, grad_o)):
            if state == "lo" and grad > KKT_TOL:
                kkt = False
            elif state == "hi" and grad < -KKT_TOL:
                kkt = False
        n_active = (sd != "free") + (so != "free")
        candidates.append((kkt, objective(d, o), n_active, d, o))

    kkt_points = [c for c in candidates if c[0]] or candidates
    best_value = max(c[1] for c in kkt_points)
    ties = [c for c in kkt_points if c[1] >= best_value - TIE_TOL]
    _, _, _, d, o = min(ties, key=lambda c: c[2])
    value = sp_revenue(problem.profile(d, o), problem.cfg, problem.sp)
    return (d, o), value


def _respond(alloc: Allocation, sp: int, cfg: MarketConfig) -> tuple[Allocation, float]:
    other = 2 if sp == 1 else 1
    problem = BestResponseProblem(sp, alloc.sp_quantities(other), cfg)
    (d, o), value = best_response(problem)
    return alloc.with_sp(sp, d, o), value


def verify_nash(alloc: Allocation, cfg: MarketConfig) -> float:
    """Largest revenue gain either SP could get by best-responding."""
    alloc = check_feasible(alloc, cfg)
    gains = []
    for sp in (1, 2):
        _, value = _respond(alloc, sp, cfg)
        gains.append(value - sp_revenue(alloc, cfg, sp))
    return max(0.0, *gains)


def best_response_iteration(
    cfg: MarketConfig,
    start: Optional[Allocation] = None,
    max_iter: int = MAX_ITER,
    tol: float = STEP_TOL,
    callback: Optional[Callable[[Allocation], None]] = None,
) -> tuple[Allocation, int]:
    """Alternate exact best responses (SP1 then SP2) until the profile settles.

    ``callback`` is called after every single-SP update.

    Returns:
        The final profile and the number of rounds taken.

    Raises:
        SolverError: if the sup-norm step is still above ``tol`` after
            ``max_iter`` rounds.
    """
    x = check_feasible(start, cfg) if start is not None else Allocation()
    step = float("inf")
    for k in range(1, max_iter + 1):
        prev = x.as_array()
        for sp in (1, 2):
            x, _ = _respond(x, sp, cfg)
            if callback is not None:
                callback(x)
        step = float(np.max(np.abs(x.as_array() - prev)))
        if step < tol:
            return x, k
    raise SolverError(
        f"best-response iteration did not converge in {max_iter} rounds (last step {step:.3e})",
        last_iterate=x,
        residual=verify_nash(x, cfg),
    )


def _result(alloc: Allocation, cfg: MarketConfig, method: Method, iterations: int = 0) -> EquilibriumResult:
    alloc = check_feasible(alloc, cfg)
    return EquilibriumResult(
        alloc=alloc,
        outcome=evaluate(alloc, cfg),
        regime=Regime.of(alloc),
        method=method,
        residual=verify_nash(alloc, cfg),
        iterations=iterations,
    )


def solve_numeric(cfg: MarketConfig, start: Optional[Allocation] = None, max_iter: int = MAX_ITER) -> EquilibriumResult:
    """Equilibrium by best-response iteration, verified against exact best responses.

    Raises:
        SolverError: on non-convergence or if the limit fails the Nash check.
    """
    alloc, iterations = best_response_iteration(cfg, start=start, max_iter=max_iter)
    result = _result(alloc, cfg, Method.NUMERIC_POTENTIAL, iterations)
    if result.residual > NASH_TOL:
        raise SolverError(
            f"limit point is not an equilibrium (residual {result.residual:.3e})",
            last_iterate=alloc,
            residual=result.residual,
        )
    logger.debug("W=%s converged in %d rounds", cfg.W, iterations)
    return result


def dedicated_monopoly(m: float, W: float) -> float:
    """Revenue-maximizing quantity of a lone SP on a dedicated market of size ``m``."""
    if m <= 0:
        return 0.0
    return W * m / (2.0 * (W + m))


def closed_form_symmetric(cfg: MarketConfig) -> EquilibriumResult:
    """Closed-form equilibrium for ``m_a == m_b``.

    Below the entry threshold ``W < m_a / 2`` both SPs serve only their own
    dedicated markets; above it both also serve the overlap.

    Raises:
        NotApplicableError: for asymmetric markets; use :func:`solve_numeric`.
    """
    if not cfg.is_symmetric:
        raise NotApplicableError(
            f"closed form needs m_a == m_b (got {cfg.m_a}, {cfg.m_b}); use solve_numeric"
        )
    m, m_ab, W = cfg.m_a, cfg.m_ab, cfg.W
    if W < m / 2:
        ded = dedicated_monopoly(m, W)
        ovl = 0.0
    else:
        C = 2 * (W + m + m_ab) - m * m_ab / W
        ded = W * m / C
        ovl = (2 * W - m) * m_ab / (3 * C)
    return _result(Allocation(ded, ovl, ovl, ded), cfg, Method.CLOSED_FORM_SYMMETRIC)


def solve_cooperation(cfg: MarketConfig) -> EquilibriumResult:
    """Both SPs stay out of AB; each then acts as a monopolist on its own market.

    The reported residual is the Nash residual of this profile in the actual
    game, which is positive once competing in AB pays off.
    """
    alloc = Allocation(dedicated_monopoly(cfg.m_a, cfg.W), 0.0, 0.0, dedicated_monopoly(cfg.m_b, cfg.W))
    return _result(alloc, cfg, Method.COOPERATION)


# -- lemma oracles -----------------------------------------------------------

@dataclass(frozen=True)
class Deviation:
    """A unilateral deviation with strictly higher revenue for ``sp``.

    ``lemma`` is 1, 2 or 3 for the boundary pattern matched. ``argument``
    names the construction used: ``"shift"`` (move delta from the overlap to
    the dedicated market), ``"enter"`` (serve delta in the dedicated market),
    ``"shed"`` (drop delta from a sub-market with a negative service price)
    or ``"best_response"``.
    """

    lemma: int
    sp: int
    argument: str
    original: Allocation
    deviated: Allocation
    gain: float
    delta: float = 0.0
    foc_solution: Optional[tuple[float, float, float]] = field(default=None)

    @property
    def foc_sign_infeasible(self) -> Optional[bool]:
        """Whether the first-order system has mixed-sign quantities (lemma 3 only)."""
        if self.foc_solution is None:
            return None
        return self.foc_solution[0] * self.foc_solution[1] < 0


def _gain(alloc: Allocation, new: Allocation, sp: int, cfg: MarketConfig) -> float:
    return sp_revenue(new, cfg, sp) - sp_revenue(alloc, cfg, sp)


def _halving_search(alloc, sp, cfg, delta_max, build, start=1e-2, max_halvings=60):
    delta = min(start, delta_max)
    for _ in range(max_halvings):
        if delta <= 0:
            return None
        new = build(delta)
        gain = _gain(alloc, new, sp, cfg)
        if gain > 0:
            return new, gain, delta
        delta /= 2
    return None


def _shed_negative(alloc: Allocation, sp: int, cfg: MarketConfig):
    """Drop a little traffic from a sub-market where ``sp`` is paying its users."""
    out = evaluate(alloc, cfg)
    ded, ovl = alloc.sp_quantities(sp)
    s_ded = out.s_a if sp == 1 else out.s_b
    options = []
    if ovl > 0 and out.s_ab < 0:
        options.append((ovl, lambda d: alloc.with_sp(sp, ded, ovl - d)))
    if ded > 0 and s_ded < 0:
        options.append((ded, lambda d: alloc.with_sp(sp, ded - d, ovl)))
    for delta_max, build in options:
        found = _halving_search(alloc, sp, cfg, delta_max, build)
        if found is not None:
            return found
    return None


def lemma3_foc_solution(cfg: MarketConfig, sp: int) -> tuple[float, float, float]:
    """Solve the interior first-order system with ``sp``'s overlap quantity fixed at 0.

    Unknowns are ``sp``'s dedicated quantity and the opponent's overlap and
    dedicated quantities. Returns them in that order.
    """
    m_own = cfg.m_a if sp == 1 else cfg.m_b
    m_opp = cfg.m_b if sp == 1 else cfg.m_a
    iw, iab = 1.0 / cfg.W, 1.0 / cfg.m_ab
    # rows: dR_own/du, dR_opp/da, dR_opp/db with (u, a, b) = own dedicated, opp overlap, opp dedicated
    M = np.array(
        [
            [2 * (1 / m_own + iw), iw, 0.0],
            [iw, 2 * iab + 2 * iw, 2 * iw],
            [0.0, 2 * iw, 2 / m_opp + 2 * iw],
        ]
    )
    u, a, b = np.linalg.solve(M, np.ones(3))
    return float(u), float(a), float(b)


def lemma_deviation(alloc: Allocation, cfg: MarketConfig) -> Optional[Deviation]:
    """Profitable deviation from a boundary profile excluded by the lemmas.

    Patterns are tried for SP1 then SP2, in the order lemma 2 (SP idle),
    lemma 1 (SP in the overlap but not its dedicated market), lemma 3 (SP
    out of the overlap while its rival is in it). Returns ``None`` when the
    profile matches lemma 3 but no profitable deviation exists, which happens
    at asymmetric equilibria where only one SP serves AB.

    Raises:
        NotApplicableError: if no pattern matches or a size is zero.
    """
    if min(cfg.m_a, cfg.m_ab, cfg.m_b) <= 0:
        raise NotApplicableError("lemma patterns assume positive sub-market sizes")
    alloc = check_feasible(alloc, cfg)

    def pos(v):
        return v > POSITIVE_TOL

    for sp in (1, 2):
        other = 2 if sp == 1 else 1
        ded, ovl = alloc.sp_quantities(sp)
        m_own = cfg.m_a if sp == 1 else cfg.m_b
        if not pos(ded) and not pos(ovl):
            found = _halving_search(alloc, sp, cfg, m_own, lambda d: alloc.with_sp(sp, d, 0.0))
            if found is not None:
                new, gain, delta = found
                return Deviation(2, sp, "enter", alloc, new, gain, delta)
            # entry fails only if the rival overloads AB, where it charges a negative price
            found = _shed_negative(alloc, other, cfg)
            if found is not None:
                new, gain, delta = found
                return Deviation(2, other, "shed", alloc, new, gain, delta)
            raise SolverError(f"no profitable deviation found for lemma 2 pattern at {alloc}")
        if not pos(ded) and pos(ovl):
            found = _halving_search(
                alloc, sp, cfg, min(ovl, m_own), lambda d: alloc.with_sp(sp, d, ovl - d)
            )
            if found is None:
                raise SolverError(f"no profitable deviation found for lemma 1 pattern at {alloc}")
            new, gain, delta = found
            return Deviation(1, sp, "shift", alloc, new, gain, delta)

    for sp in (1, 2):
        other = 2 if sp == 1 else 1
        own_ovl = alloc.sp_quantities(sp)[1]
        opp_ovl = alloc.sp_quantities(other)[1]
        if not pos(own_ovl) and pos(opp_ovl):
            foc = lemma3_foc_solution(cfg, sp)
            for mover in (sp, other):
                new, value = _respond(alloc, mover, cfg)
                gain = value - sp_revenue(alloc, cfg, mover)
                if gain > TIE_TOL:
                    return Deviation(3, mover, "best_response", alloc, new, gain, foc_solution=foc)
            return None

    raise NotApplicableError(f"profile {alloc} matches no lemma boundary pattern")
