"""Command-line interface: run a board, verify against the oracle, dump boards.

All output is deterministic: identical invocations produce byte-identical
stdout and trace files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .compiler import BoardRecipe, build_initial_state
from .engine import EngineError, GameEngine
from .machine import (
    ManifestError,
    TmState,
    load_default_program,
    load_manifest,
    parse_tape_json,
)
from .model import Outcome, dump_board, dump_board_json
from .trace import FileSink
from .verify import ExtractionError, extract_config, verify_random_cases

MANIFEST_ENV = "MTG_TURING_MANIFEST"


def _load_program(parser: argparse.ArgumentParser, path: str | None):
    path = path or os.environ.get(MANIFEST_ENV)
    try:
        if path:
            return load_manifest(path)
        return load_default_program()
    except (OSError, ManifestError) as exc:
        parser.error(f"cannot load manifest: {exc}")


def _load_recipe(parser: argparse.ArgumentParser, args) -> BoardRecipe:
    program = _load_program(parser, args.manifest)
    try:
        with open(args.tape, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        tape, file_state = parse_tape_json(data)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot load tape file: {exc}")
    if args.state:
        state = TmState(args.state)
    elif file_state is not None:
        state = file_state
    else:
        parser.error("no start state: pass --state or put a 'state' field in the tape file")
    return BoardRecipe(program=tuple(program), tape=tape, start_state=state)


def _print_tape(config) -> None:
    tape = config.tape
    print(f"state: {config.state.value}")
    print("left: " + (",".join(s.creature_type for s in tape.left) or "(empty)"))
    print(f"head: {tape.head.creature_type}")
    print("right: " + (",".join(s.creature_type for s in tape.right) or "(empty)"))


def cmd_run(parser: argparse.ArgumentParser, args) -> int:
    recipe = _load_recipe(parser, args)
    if args.max_steps < 1:
        parser.error("--max-steps must be >= 1")
    state = build_initial_state(recipe)
    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        engine = GameEngine(state, sink=FileSink(trace_fh) if trace_fh else None)
        steps = 0
        try:
            for _ in range(args.max_steps):
                report = engine.run_computational_step()
                steps += 1
                if report.halted:
                    break
        except EngineError as exc:
            print(f"engine-error at step {steps + 1}: {exc}")
            return 3
        if state.outcome is Outcome.ALICE_WINS:
            print(f"halted-alice-wins at step {steps}")
        else:
            state.outcome = Outcome.STEP_LIMIT
            print("step-limit")
        try:
            _print_tape(extract_config(state))
        except ExtractionError as exc:
            print(f"extraction-error: {exc}")
            return 3
        return 0
    finally:
        if trace_fh:
            trace_fh.close()


def cmd_verify(parser: argparse.ArgumentParser, args) -> int:
    if args.cases < 1:
        parser.error("--cases must be >= 1")
    if args.steps < 1:
        parser.error("--steps must be >= 1")
    program = _load_program(parser, args.manifest)
    report = verify_random_cases(program, cases=args.cases, steps=args.steps, seed=args.seed)
    for case in report.cases:
        turns3 = sum(1 for r in case.step_records if r.alice_turns == 3)
        turns4 = sum(1 for r in case.step_records if r.alice_turns == 4)
        bits = [
            case.label,
            f"seed={args.seed}",
            f"state={case.start_state.value}",
            f"cells={case.tape.cells()}",
            f"steps={case.steps_run}",
            "result=" + (f"halted@{case.won_at}" if case.won_at else "step-limit"),
            f"turns3={turns3}",
            f"turns4={turns4}",
            f"digest={case.trace_digest[:12]}",
        ]
        if case.ok:
            bits.append("ok")
        else:
            issues = []
            if case.divergence:
                issues.append(case.divergence)
            if case.turn_mismatches:
                issues.append(f"turn-count mismatch at steps {case.turn_mismatches}")
            if case.audit and not case.audit.ok:
                issues.extend(case.audit.violations)
            bits.append("FAIL: " + "; ".join(issues))
        print(" ".join(bits))
    good = sum(1 for c in report.cases if c.ok)
    print(f"{good}/{len(report.cases)} ok")
    return 0 if report.ok else 1


def cmd_dump_board(parser: argparse.ArgumentParser, args) -> int:
    recipe = _load_recipe(parser, args)
    state = build_initial_state(recipe)
    if args.format == "json":
        sys.stdout.write(dump_board_json(state))
    else:
        sys.stdout.write(dump_board(state))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtg-turing",
        description="Run and verify the (2,18) universal Turing machine embedded in a "
        "two-player Magic: The Gathering board.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="build a board from a tape and run it")
    run.add_argument("--tape", required=True, help="tape file (JSON: state/left/head/right)")
    run.add_argument("--state", choices=["q1", "q2"], help="start state (overrides tape file)")
    run.add_argument("--max-steps", type=int, required=True, help="computational step budget")
    run.add_argument("--trace", help="write the trace log to this file")
    run.add_argument("--manifest", help=f"program manifest (default: bundled; or ${MANIFEST_ENV})")

    verify = sub.add_parser("verify", help="lockstep-verify random tapes against the interpreter")
    verify.add_argument("--cases", type=int, required=True)
    verify.add_argument("--steps", type=int, required=True)
    verify.add_argument("--seed", type=int, required=True)
    verify.add_argument("--manifest", help=f"program manifest (default: bundled; or ${MANIFEST_ENV})")

    dump = sub.add_parser("dump-board", help="print the compiled initial board")
    dump.add_argument("--tape", required=True)
    dump.add_argument("--state", choices=["q1", "q2"])
    dump.add_argument("--format", choices=["text", "json"], default="text")
    dump.add_argument("--manifest", help=f"program manifest (default: bundled; or ${MANIFEST_ENV})")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(parser, args)
    if args.command == "verify":
        return cmd_verify(parser, args)
    if args.command == "dump-board":
        return cmd_dump_board(parser, args)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
