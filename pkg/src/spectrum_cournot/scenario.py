"""Scenario files: flat ``key=value`` text describing one market and a bandwidth or grid.

Example::

    # small overlap, symmetric coverage
    name=symmetric_small_ab
    m_a=0.4
    m_ab=0.2
    m_b=0.4
    w_min=0.01
    w_max=1.0
    w_step=0.01
    mode=both
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .analysis import SweepSpec
from .errors import ScenarioError
from .model import SIZE_SUM_TOL, MarketConfig

KEYS = ("name", "m_a", "m_ab", "m_b", "w", "w_min", "w_max", "w_step", "mode")
MODES = ("competition", "cooperation", "both")
SIZE_SUM_SCENARIO_TOL = 1e-9


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    m_a: float
    m_ab: float
    m_b: float
    w: Optional[float] = None
    w_min: Optional[float] = None
    w_max: Optional[float] = None
    w_step: Optional[float] = None
    mode: str = "both"

    @property
    def is_sweep(self) -> bool:
        return self.w is None

    def config(self, W: Optional[float] = None) -> MarketConfig:
        """Market config at bandwidth ``W`` (default: the scenario's single ``w``, else ``w_min``).

        Sizes accepted at the file's 1e-9 tolerance are rescaled to sum to one.
        """
        sizes = (self.m_a, self.m_ab, self.m_b)
        total = sum(sizes)
        if abs(total - 1.0) > SIZE_SUM_TOL:
            sizes = tuple(s / total for s in sizes)
        if W is None:
            W = self.w if self.w is not None else self.w_min
        return MarketConfig(*sizes, W)

    def sweep_spec(self) -> SweepSpec:
        if self.is_sweep:
            lo, hi, step = self.w_min, self.w_max, self.w_step
        else:
            lo, hi, step = self.w, self.w, 1.0
        return SweepSpec(self.config(lo), lo, hi, step, include_cooperation=self.mode != "competition")


def _parse_number(raw: str, key: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ScenarioError(f"{key} is not a number: {raw!r}", line=lineno, field=key) from None
    if not math.isfinite(value):
        raise ScenarioError(f"{key} must be finite", line=lineno, field=key)
    return value


def parse_scenario(text: Union[bytes, str]) -> ScenarioFile:
    """Parse and validate a scenario file.

    Raises:
        ScenarioError: malformed line (with line number), unknown or
            duplicate key, or a validation failure naming the field.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioError(f"scenario is not valid UTF-8: {exc}") from None
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ScenarioError(f"expected key=value, got {stripped!r}", line=lineno)
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in KEYS:
            raise ScenarioError(f"unknown key {key!r}", line=lineno, field=key)
        if key in values:
            raise ScenarioError(f"duplicate key {key!r}", line=lineno, field=key)
        if key in ("name", "mode"):
            if not raw:
                raise ScenarioError(f"{key} is empty", line=lineno, field=key)
            values[key] = raw
        else:
            values[key] = _parse_number(raw, key, lineno)
    return _validate(values)


def _validate(values: dict) -> ScenarioFile:
    for key in ("name", "m_a", "m_ab", "m_b"):
        if key not in values:
            raise ScenarioError(f"missing required key {key!r}", field=key)
    for key in ("m_a", "m_ab", "m_b"):
        if values[key] < 0:
            raise ScenarioError(f"{key} must be nonnegative", field=key)
    total = values["m_a"] + values["m_ab"] + values["m_b"]
    if abs(total - 1.0) > SIZE_SUM_SCENARIO_TOL:
        raise ScenarioError(
            f"m_a + m_ab + m_b must equal 1 (total market size is normalized), got {total!r}",
            field="m_a",
        )
    mode = values.get("mode", "both")
    if mode not in MODES:
        raise ScenarioError(f"mode must be one of {MODES}, got {mode!r}", field="mode")
    range_keys = [k for k in ("w_min", "w_max", "w_step") if k in values]
    if "w" in values and range_keys:
        raise ScenarioError("give either w or w_min/w_max/w_step, not both", field="w")
    if "w" not in values and len(range_keys) != 3:
        missing = sorted(set(("w_min", "w_max", "w_step")) - set(range_keys))
        raise ScenarioError(f"missing bandwidth: need w or all of w_min/w_max/w_step (missing {missing})", field=missing[0])
    for key in ("w", "w_min", "w_max", "w_step"):
        if key in values and values[key] <= 0:
            raise ScenarioError(f"{key} must be positive", field=key)
    if range_keys and values["w_min"] > values["w_max"]:
        raise ScenarioError("w_min exceeds w_max", field="w_min")
    if range_keys and (values["w_max"] - values["w_min"]) / values["w_step"] > 1e6:
        raise ScenarioError("sweep grid has more than 1e6 steps", field="w_step")
    return ScenarioFile(
        name=values["name"],
        m_a=values["m_a"],
        m_ab=values["m_ab"],
        m_b=values["m_b"],
        w=values.get("w"),
        w_min=values.get("w_min"),
        w_max=values.get("w_max"),
        w_step=values.get("w_step"),
        mode=mode,
    )


def format_scenario(sf: ScenarioFile) -> str:
    """Canonical text form; ``parse_scenario`` inverts it."""
    lines = [f"name={sf.name}", f"m_a={sf.m_a!r}", f"m_ab={sf.m_ab!r}", f"m_b={sf.m_b!r}"]
    if sf.is_sweep:
        lines += [f"w_min={sf.w_min!r}", f"w_max={sf.w_max!r}", f"w_step={sf.w_step!r}"]
    else:
        lines.append(f"w={sf.w!r}")
    lines.append(f"mode={sf.mode}")
    return "\n".join(lines) + "\n"


def _preset(name, m_a, m_ab, m_b):
    return ScenarioFile(name, m_a, m_ab, m_b, w_min=0.01, w_max=1.0, w_step=0.01, mode="both")


# The asymmetric sizes are representative choices with m_a > m_b.
PRESETS = {
    p.name: p
    for p in (
        _preset("symmetric_small_ab", 0.4, 0.2, 0.4),
        _preset("symmetric_large_ab", 0.2, 0.6, 0.2),
        _preset("asymmetric_small_ab", 0.5, 0.2, 0.3),
        _preset("asymmetric_large_ab", 0.3, 0.5, 0.2),
    )
}


def load_scenario(ref: str) -> ScenarioFile:
    """Load a scenario from a file path, or by preset name (``.cfg`` suffix optional)."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_bytes())
    name = path.name[: -len(".cfg")] if path.name.endswith(".cfg") else path.name
    if name in PRESETS:
        return PRESETS[name]
    raise ScenarioError(f"no scenario file or preset named {ref!r}; presets: {sorted(PRESETS)}")
