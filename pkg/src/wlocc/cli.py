"""Command-line front end.

Exit codes: 0 ok, 2 malformed input, 3 domain/precondition failure, 4 I/O.
Errors are reported as JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import bounds, protocol, symmetric
from .errors import WClassError
from .measurement import zero_x0_filter
from .state import state_from_json

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, error: str, message: str):
        super().__init__(message)
        self.exit_code = code
        self.error = error


@dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: str | None = None
    output_path: str | None = None
    trials: int = 100_000
    seed: int = 0
    grid: float = 0.001

    def __post_init__(self):
        if self.trials < 1:
            raise CliError(EXIT_PARSE, "bad_trials", "--trials must be >= 1")
        if not (0 < self.grid <= 1):
            raise CliError(EXIT_PARSE, "bad_grid", "--grid must lie in (0, 1]")


def _read_json(path: str | None) -> dict:
    try:
        text = sys.stdin.read() if path in (None, "-") else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, "io_error", str(exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, "malformed_json", str(exc)) from exc


def _parse_state(record: dict, key: str):
    try:
        return state_from_json(record, key)
    except WClassError:
        raise
    except ValueError as exc:
        raise CliError(EXIT_PARSE, "malformed_input", str(exc)) from exc


def _pair(cfg: RunConfig):
    record = _read_json(cfg.input_path)
    return _parse_state(record, "x"), _parse_state(record, "y")


def _emit(obj, cfg: RunConfig) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if cfg.output_path and cfg.command != "symmetric":
        try:
            Path(cfg.output_path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_IO, "io_error", str(exc)) from exc
    else:
        sys.stdout.write(text)


def cmd_bounds(cfg: RunConfig) -> dict:
    x, y = _pair(cfg)
    return bounds.lower_bound(x, y).to_json()


def cmd_protocol_plan(cfg: RunConfig) -> dict:
    x, y = _pair(cfg)
    return protocol.plan_transform(x, y).to_json()


def cmd_protocol_simulate(cfg: RunConfig) -> dict:
    x, y = _pair(cfg)
    plan = protocol.plan_transform(x, y)
    res = protocol.monte_carlo(x, plan, cfg.trials, cfg.seed)
    return {
        "estimate": res.estimate,
        "stderr": res.stderr,
        "predicted": plan.predicted_success,
        "trials": cfg.trials,
        "seed": cfg.seed,
    }


def cmd_distill(cfg: RunConfig) -> dict:
    x = _parse_state(_read_json(cfg.input_path), "x")
    value = bounds.distill_bound(x)
    filt = zero_x0_filter(x)
    return {"bound": value, "lambda": filt.lam, "acting_party": filt.party}


def cmd_symmetric(cfg: RunConfig) -> dict:
    rows = symmetric.difference_profile(cfg.grid)
    out = cfg.output_path or "symmetric.csv"
    try:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "p_max", "q_max", "diff"])
            for row in rows:
                w.writerow([f"{v:.9g}" for v in row])
    except OSError as exc:
        raise CliError(EXIT_IO, "io_error", str(exc)) from exc
    return {
        "output": out,
        "rows": len(rows),
        "crossing_point": symmetric.crossing_point(),
        "max_abs_diff": max(abs(r[3]) for r in rows),
    }


COMMANDS = {
    "bounds": cmd_bounds,
    "plan": cmd_protocol_plan,
    "simulate": cmd_protocol_simulate,
    "distill": cmd_distill,
    "symmetric": cmd_symmetric,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlocc", description="LOCC conversion of W-class states")
    sub = parser.add_subparsers(dest="command", required=True)

    def io_flags(p, output=False):
        p.add_argument("--input", dest="input_path", help="JSON input file (default: stdin)")
        p.add_argument("--output", dest="output_path", help="write JSON here instead of stdout")

    io_flags(sub.add_parser("bounds", help="upper/lower bounds for a pair {x, y}"))
    proto = sub.add_parser("protocol", help="plan or simulate a conversion")
    psub = proto.add_subparsers(dest="mode", required=True)
    io_flags(psub.add_parser("plan", help="emit the protocol plan"))
    sim = psub.add_parser("simulate", help="Monte Carlo run of the plan")
    io_flags(sim)
    sim.add_argument("--trials", type=int, default=100_000)
    sim.add_argument("--seed", type=int, default=0)
    io_flags(sub.add_parser("distill", help="W_N distillation bound for {x}"))
    sym = sub.add_parser("symmetric", help="write the p_max/q_max comparison CSV")
    sym.add_argument("--grid", type=float, default=0.001)
    sym.add_argument("--output", dest="output_path", default="symmetric.csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.mode if args.command == "protocol" else args.command
    try:
        cfg = RunConfig(
            command=command,
            input_path=getattr(args, "input_path", None),
            output_path=getattr(args, "output_path", None),
            trials=getattr(args, "trials", 100_000),
            seed=getattr(args, "seed", 0),
            grid=getattr(args, "grid", 0.001),
        )
        _emit(COMMANDS[command](cfg), cfg)
    except CliError as exc:
        sys.stderr.write(json.dumps({"error": exc.error, "message": str(exc)}) + "\n")
        return exc.exit_code
    except WClassError as exc:
        sys.stderr.write(json.dumps(exc.to_json()) + "\n")
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
