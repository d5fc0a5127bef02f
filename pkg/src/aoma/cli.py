"""Command line entry point.

Settings are layered: built-in defaults, then ``--preset``, then a JSON
``--config`` file, then explicit flags.  CSV goes to ``--out`` or, without
it, to standard output with summary lines prefixed by ``#``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .experiments import AXES, MODES, PRESETS, ExperimentConfig, run, to_csv
from .mdp import RviNotConverged
from .search import SearchError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2
EXIT_NOT_CONVERGED = 3


def _int_pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers like 3,13, got {text!r}") from None
    return a, b


def _float_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers like 0.5,0.5, got {text!r}") from None
    return a, b


def _grid(text: str) -> tuple[float, ...]:
    """``a,b,c`` or ``start:stop:step`` (inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return tuple(round(start + i * step, 10) for i in range(count))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors; keep exit code 2 for failed checks
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="aoma",
        description="Evaluate, optimize and cross-check transmission policies for remote estimation of a two-state source.",
    )
    ap.add_argument("--p", type=float, help="probability the source moves 0 -> 1")
    ap.add_argument("--q", type=float, help="probability the source moves 1 -> 0")
    ap.add_argument("--ps", type=float, help="channel success probability")
    ap.add_argument("--beta", type=float, help="weight of missed alarms in the age cost")
    ap.add_argument("--lambda", dest="lam", type=float, help="price per transmission")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--policy", type=_int_pair, metavar="MA,FA", help="switching thresholds")
    ap.add_argument("--rates", type=_float_pair, metavar="F0,F1", help="age-agnostic transmit probabilities")
    ap.add_argument("--axis", choices=AXES, help="sweep axis")
    ap.add_argument("--grid", type=_grid, help="sweep values: a,b,c or start:stop:step")
    ap.add_argument("--epsilon", type=float, help="truncation gap target for the search")
    ap.add_argument("--nmax", type=int, help="largest truncation size the search may use")
    ap.add_argument("--n", type=int, help="truncation size for value iteration and cross-checks")
    ap.add_argument("--horizon", type=int, help="simulated slots")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, help="worker processes for sweeps")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--config", type=Path, help="JSON file with any of the settings above")
    ap.add_argument("--out", type=Path, help="CSV destination (default: standard output)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.preset:
        values.update(PRESETS[args.preset])
    if args.config:
        loaded = json.loads(args.config.read_text())
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        values.update({("lam" if k == "lambda" else k): v for k, v in loaded.items()})
    skip = {"preset", "config", "out", "verbose"}
    values.update({k: v for k, v in vars(args).items() if v is not None and k not in skip})
    return ExperimentConfig.from_mapping(values)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # --help and usage errors; report them as a return code like every other outcome
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        outcome = run(cfg)
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RviNotConverged, SearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    text = to_csv(outcome.rows)
    try:
        if args.out:
            args.out.write_text(text, encoding="utf-8", newline="\n")
            for line in outcome.summary:
                print(line)
        else:
            for line in outcome.summary:
                print(f"# {line}")
            sys.stdout.write(text)
            sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if outcome.ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
