"""Command-line entry point.

Subcommands::

    spectrum-cournot solve      --scenario FILE_OR_PRESET [--w W] [--mode M]
    spectrum-cournot sweep      --scenario FILE_OR_PRESET [--out PATH] [--mode M]
    spectrum-cournot thresholds --scenario FILE_OR_PRESET
    spectrum-cournot verify     --scenario FILE_OR_PRESET [--seed N]

Exit codes: 0 success, 1 validation error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .analysis import sweep
from .equilibrium import solve_cooperation, solve_numeric
from .errors import ConfigError, ScenarioError, SolverError
from .output import emit_sweep_csv, result_json
from .scenario import MODES, PRESETS, load_scenario
from .verify import run_all

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectrum-cournot", description="Equilibria of a two-provider shared-band Cournot market.")
    sub = parser.add_subparsers(dest="command", metavar="{solve,sweep,verify,thresholds}", parser_class=_Parser)
    sub.required = True
    scenario_help = f"scenario file, or a preset name: {', '.join(PRESETS)}"

    p = sub.add_parser("solve", help="solve at one bandwidth and print JSON")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--w", type=float, help="bandwidth (overrides the scenario)")
    p.add_argument("--mode", choices=("competition", "cooperation"), default="competition")

    p = sub.add_parser("sweep", help="sweep the bandwidth grid and emit CSV")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--mode", choices=MODES, help="override the scenario's mode")

    p = sub.add_parser("thresholds", help="print the bandwidths where each SP enters the overlap")
    p.add_argument("--scenario", required=True, help=scenario_help)

    p = sub.add_parser("verify", help="run the potential, lemma and uniqueness property suites")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _solve(args, out) -> int:
    sc = load_scenario(args.scenario)
    W = args.w if args.w is not None else (sc.w if sc.w is not None else None)
    if W is None:
        raise ScenarioError("scenario has no single w; pass --w", field="w")
    cfg = sc.config(W)
    result = solve_cooperation(cfg) if args.mode == "cooperation" else solve_numeric(cfg)
    out.write(result_json(result, W) + "\n")
    return EXIT_OK


def _sweep(args, out) -> int:
    sc = load_scenario(args.scenario)
    mode = args.mode or sc.mode
    spec = sc.sweep_spec()
    if mode != "competition" and not spec.include_cooperation:
        spec = type(spec)(spec.cfg_base, spec.w_min, spec.w_max, spec.w_step, True)
    data = emit_sweep_csv(sweep(spec), mode)
    if args.out:
        Path(args.out).write_bytes(data)
    elif hasattr(out, "buffer"):
        out.flush()
        out.buffer.write(data)
    else:
        out.write(data.decode("utf-8"))
    return EXIT_OK


def _thresholds(args, out) -> int:
    sc = load_scenario(args.scenario)
    table = sweep(sc.sweep_spec())
    parts = []
    for sp in (1, 2):
        found = table.thresholds_for(sp)
        parts.append(f"SP{sp}: " + (" ".join(f"{w:.6f}" for w in found) if found else "none"))
    out.write(" ".join(parts) + "\n")
    return EXIT_OK


def _verify(args, out) -> int:
    sc = load_scenario(args.scenario)
    spec = sc.sweep_spec()
    results = run_all(sc.config(), spec.grid(), seed=args.seed)
    for r in results:
        out.write(r.line() + "\n")
    failed = [r for r in results if r.asserted and not r.passed]
    out.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    return EXIT_SOLVER if failed else EXIT_OK


COMMANDS = {"solve": _solve, "sweep": _sweep, "thresholds": _thresholds, "verify": _verify}


def run_cli(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_VALIDATION
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args, out)
    except (ScenarioError, ConfigError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except SolverError as exc:
        err.write(f"solver failure: {exc} (residual {exc.residual:.3e})\n")
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run_cli())
