"""Deterministic CSV and JSON serialization of equilibrium results."""

from __future__ import annotations

import json

from .analysis import SweepTable
from .equilibrium import EquilibriumResult

ALLOC_FIELDS = ("x1_a", "x1_ab", "x2_ab", "x2_b")
OUTCOME_FIELDS = (
    "p_a", "p_ab", "p_b",
    "l_a", "l_ab", "l_b",
    "r1", "r2",
    "cs_a", "cs_ab", "cs_b", "cs_total",
    "welfare",
)
RESULT_COLUMNS = ALLOC_FIELDS + OUTCOME_FIELDS + ("regime",)


def columns(mode: str) -> list[str]:
    """CSV header for ``mode`` (``competition``, ``cooperation`` or ``both``)."""
    cols = ["W", *RESULT_COLUMNS]
    if mode == "both":
        cols += [f"coop_{c}" for c in RESULT_COLUMNS]
    return cols


def _fmt(value: float) -> str:
    # repr is the shortest string that round-trips the double
    return repr(float(value))


def result_fields(result: EquilibriumResult) -> dict[str, object]:
    values: dict[str, object] = {name: getattr(result.alloc, name) for name in ALLOC_FIELDS}
    values.update({name: getattr(result.outcome, name) for name in OUTCOME_FIELDS})
    values["regime"] = result.regime.value
    return values


def _cells(result: EquilibriumResult) -> list[str]:
    values = result_fields(result)
    return [values[c] if c == "regime" else _fmt(values[c]) for c in RESULT_COLUMNS]


def emit_sweep_csv(table: SweepTable, mode: str = "competition") -> bytes:
    """Sweep table as CSV bytes with LF line endings.

    ``mode="cooperation"`` writes the cooperation results in the main
    columns; ``mode="both"`` appends ``coop_*`` columns.
    """
    if mode not in ("competition", "cooperation", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    lines = [",".join(columns(mode))]
    for row in table.rows:
        if mode != "competition" and row.cooperation is None:
            raise ValueError("table has no cooperation results")
        main = row.cooperation if mode == "cooperation" else row.competition
        cells = [_fmt(row.W), *_cells(main)]
        if mode == "both":
            cells += _cells(row.cooperation)
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode("utf-8")


def result_json(result: EquilibriumResult, W: float) -> str:
    payload = {"W": W, **result_fields(result)}
    payload["method"] = result.method.value
    payload["residual"] = result.residual
    payload["iterations"] = result.iterations
    return json.dumps(payload, indent=2)
