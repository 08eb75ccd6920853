"""Bandwidth sweeps, entry thresholds and competition-vs-cooperation reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .equilibrium import (
    NASH_TOL,
    POSITIVE_TOL,
    EquilibriumResult,
    solve_cooperation,
    solve_numeric,
)
from .errors import ConfigError, SolverError
from .model import MarketConfig, MarketOutcome

NOISE_FLOOR = 1e-12
MAX_GRID_POINTS = 10**6
THRESHOLD_RESOLUTION = 1e-8

METRICS = ("revenue_total", "cs_total", "welfare", "r1", "r2")


@dataclass(frozen=True)
class SweepSpec:
    """Bandwidth grid ``w_min, w_min + w_step, ..., w_max`` over fixed sizes.

    ``cfg_base.W`` is ignored.
    """

    cfg_base: MarketConfig
    w_min: float = 0.01
    w_max: float = 1.0
    w_step: float = 0.01
    include_cooperation: bool = True

    def __post_init__(self):
        if not (self.w_min > 0 and self.w_max > 0):
            raise ConfigError("w_min and w_max must be positive")
        if self.w_step <= 0:
            raise ConfigError("w_step must be positive")
        if self.w_min > self.w_max:
            raise ConfigError(f"w_min ({self.w_min}) exceeds w_max ({self.w_max})")
        if (self.w_max - self.w_min) / self.w_step > MAX_GRID_POINTS:
            raise ConfigError("grid has more than 1e6 steps")

    def grid(self) -> list[float]:
        n = int(round((self.w_max - self.w_min) / self.w_step))
        # keep the end point only if it lies on the grid
        while n > 0 and self.w_min + n * self.w_step > self.w_max + 1e-9 * self.w_step:
            n -= 1
        return [round(self.w_min + i * self.w_step, 12) for i in range(n + 1)]


@dataclass(frozen=True)
class SweepRow:
    W: float
    competition: EquilibriumResult
    cooperation: Optional[EquilibriumResult] = None


@dataclass(frozen=True)
class Threshold:
    sp: int
    W: float


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)
    detected_thresholds: list[Threshold] = field(default_factory=list)

    def thresholds_for(self, sp: int) -> list[float]:
        return [t.W for t in self.detected_thresholds if t.sp == sp]


def _overlap_quantity(result: EquilibriumResult, sp: int) -> float:
    return result.alloc.x1_ab if sp == 1 else result.alloc.x2_ab


def _solve_at(cfg: MarketConfig, W: float) -> EquilibriumResult:
    try:
        return solve_numeric(cfg.with_bandwidth(W))
    except SolverError as exc:
        raise SolverError(f"solver failed at W={W!r}: {exc}", exc.last_iterate, exc.residual) from exc


def locate_entry(cfg: MarketConfig, sp: int, w_lo: float, w_hi: float, resolution: float = THRESHOLD_RESOLUTION) -> float:
    """Bisect for the bandwidth where ``sp`` starts serving the overlap.

    Assumes ``sp`` is out of AB at ``w_lo`` and in it at ``w_hi``. Returns the
    midpoint of the final bracket.
    """
    lo, hi = w_lo, w_hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if _overlap_quantity(_solve_at(cfg, mid), sp) > POSITIVE_TOL:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def sweep(spec: SweepSpec) -> SweepTable:
    """Solve the game at every grid bandwidth and locate entry thresholds.

    Raises:
        SolverError: naming the first bandwidth where the solver fails.
    """
    cfg = spec.cfg_base
    rows = []
    for W in spec.grid():
        comp = _solve_at(cfg, W)
        if comp.residual > NASH_TOL:
            raise SolverError(f"unverified equilibrium at W={W!r}", comp.alloc, comp.residual)
        coop = solve_cooperation(cfg.with_bandwidth(W)) if spec.include_cooperation else None
        rows.append(SweepRow(W, comp, coop))

    thresholds = []
    for sp in (1, 2):
        for prev, cur in zip(rows, rows[1:]):
            was_in = _overlap_quantity(prev.competition, sp) > POSITIVE_TOL
            is_in = _overlap_quantity(cur.competition, sp) > POSITIVE_TOL
            if not was_in and is_in:
                thresholds.append(Threshold(sp, locate_entry(cfg, sp, prev.W, cur.W)))
    return SweepTable(rows, thresholds)


def metric_value(outcome: MarketOutcome, metric: str) -> float:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return getattr(outcome, metric)


def _runs(Ws: Sequence[float], flags: Sequence[bool]) -> list[tuple[float, float]]:
    """Maximal runs of consecutive True flags as ``(W_first, W_last)``."""
    intervals = []
    start = None
    for i, flag in enumerate(flags):
        if flag and start is None:
            start = i
        if not flag and start is not None:
            intervals.append((Ws[start], Ws[i - 1]))
            start = None
    if start is not None:
        intervals.append((Ws[start], Ws[len(flags) - 1]))
    return intervals


def monotonicity_report(table: SweepTable, metric: str) -> list[tuple[float, float]]:
    """Maximal W-intervals over which ``metric`` strictly decreases row to row.

    Each interval spans from the row where the decrease starts to the row
    where it ends; changes within 1e-12 count as flat.
    """
    rows = table.rows
    values = [metric_value(r.competition.outcome, metric) for r in rows]
    intervals = []
    start = None
    for i in range(1, len(rows)):
        decreasing = values[i] < values[i - 1] - NOISE_FLOOR
        if decreasing and start is None:
            start = i - 1
        if not decreasing and start is not None:
            intervals.append((rows[start].W, rows[i - 1].W))
            start = None
    if start is not None:
        intervals.append((rows[start].W, rows[-1].W))
    return intervals


@dataclass(frozen=True)
class ComparisonRow:
    W: float
    competition: MarketOutcome
    cooperation: MarketOutcome


@dataclass
class ComparisonReport:
    """Per-bandwidth metrics under both modes and the W-intervals where cooperation wins.

    Interval keys: ``both_revenues`` (r1 and r2), ``revenue_total``,
    ``cs_total``, ``welfare`` and ``revenues_and_cs`` (r1, r2 and cs_total
    simultaneously). ``competition_cs_wins`` lists intervals where
    competition's total surplus is strictly higher.
    """

    rows: list[ComparisonRow]
    cooperation_wins: dict[str, list[tuple[float, float]]]
    competition_cs_wins: list[tuple[float, float]]


def _beats(a: float, b: float) -> bool:
    return a > b + NOISE_FLOOR


def compare_cooperation(table: SweepTable) -> ComparisonReport:
    if any(r.cooperation is None for r in table.rows):
        raise ValueError("table was built without cooperation results")
    rows = [ComparisonRow(r.W, r.competition.outcome, r.cooperation.outcome) for r in table.rows]
    Ws = [r.W for r in rows]
    checks = {
        "both_revenues": lambda c, k: _beats(k.r1, c.r1) and _beats(k.r2, c.r2),
        "revenue_total": lambda c, k: _beats(k.revenue_total, c.revenue_total),
        "cs_total": lambda c, k: _beats(k.cs_total, c.cs_total),
        "welfare": lambda c, k: _beats(k.welfare, c.welfare),
        "revenues_and_cs": lambda c, k: _beats(k.r1, c.r1) and _beats(k.r2, c.r2) and _beats(k.cs_total, c.cs_total),
    }
    wins = {
        name: _runs(Ws, [check(r.competition, r.cooperation) for r in rows])
        for name, check in checks.items()
    }
    comp_cs = _runs(Ws, [_beats(r.competition.cs_total, r.cooperation.cs_total) for r in rows])
    return ComparisonReport(rows, wins, comp_cs)
