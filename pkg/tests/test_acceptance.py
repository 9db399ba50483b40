"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
PASS lines; the shared 200-case corpus takes a couple of minutes.
"""

import csv
import json
from collections import Counter
from pathlib import Path

import pytest

from mtg_turing.cli import main
from mtg_turing.compiler import BoardRecipe, build_initial_state
from mtg_turing.engine import ForcedMoveViolation, GameEngine
from mtg_turing.machine import (
    BLANK,
    TmConfig,
    TmState,
    TmTape,
    load_default_program,
    symbol_by_type,
    tape_normalize,
    tm_run,
    tm_step,
)
from mtg_turing.model import (
    ALICE,
    BOB,
    BehaviorKind,
    Color,
    Outcome,
    effective_stats,
)
from mtg_turing.trace import EventKind, ListSink
from mtg_turing.verify import (
    ExtractionError,
    extract_config,
    verify_random_cases,
)

GOLDEN = Path(__file__).parent / "golden" / "table1_census.csv"

CORPUS_CASES = 200
CORPUS_STEPS = 300
CORPUS_SEED = 20260810


@pytest.fixture(scope="module")
def program():
    return tuple(load_default_program())


@pytest.fixture(scope="module")
def corpus(program):
    """200 seeded random tapes (sides up to 8 cells, both start states),
    300 computational steps each or until halt."""
    return verify_random_cases(program, cases=CORPUS_CASES, steps=CORPUS_STEPS, seed=CORPUS_SEED)


def tape(left=(), head="Cephalid", right=()):
    return TmTape(
        tuple(symbol_by_type(t) for t in left),
        symbol_by_type(head),
        tuple(symbol_by_type(t) for t in right),
    )


def report_pass(name, detail):
    print(f"\nACCEPTANCE [{name}]: PASS ({detail})")


def test_criterion_1_oracle_lockstep(corpus):
    """Extracted configuration equals the interpreter's at every boundary."""
    assert len(corpus.cases) == CORPUS_CASES
    divergent = [c for c in corpus.cases if c.divergence is not None]
    assert divergent == [], [c.divergence for c in divergent[:3]]
    total_steps = sum(c.steps_run for c in corpus.cases)
    halted = sum(1 for c in corpus.cases if c.won_at is not None)
    for c in corpus.cases:
        assert c.halted_at == c.won_at
    report_pass(
        "oracle-lockstep",
        f"{len(corpus.cases)} tapes, {total_steps} steps, {halted} halting, 0 divergences",
    )


def test_criterion_2_cycle_length(corpus):
    """Alice-turn count is 4 on untapped rules and 3 on tapped rules, always."""
    checked = 0
    for case in corpus.cases:
        assert case.turn_mismatches == []
        for rec in case.step_records:
            if rec.halted:
                continue
            assert rec.alice_turns == (3 if rec.rule_tapped else 4)
            checked += 1
    assert checked > 1000
    report_pass("cycle-length", f"{checked} steps, 100% agreement with tapped flags")


HALTING_TAPES = [
    (TmState.Q1, (), "Rhino", ()),
    (TmState.Q1, ("Rhino",), "Orc", ()),
    (TmState.Q2, ("Rhino",), "Rhino", ()),
    (TmState.Q1, ("Rhino",), "Cephalid", ()),
    (TmState.Q1, ("Cephalid", "Rhino"), "Cephalid", ()),
    (TmState.Q1, ("Cephalid", "Cephalid", "Rhino"), "Cephalid", ("Myr",)),
    (TmState.Q1, ("Cephalid", "Cephalid", "Cephalid", "Rhino"), "Cephalid", ()),
    (TmState.Q1, ("Rhino",), "Aetherborn", ("Demon", "Elf")),
    (TmState.Q1, ("Elf", "Rhino"), "Harpy", ()),
    (TmState.Q2, ("Cephalid", "Rhino"), "Rhino", ("Sliver",)),
]


def test_criterion_3_halting_claim(program):
    """The game is won exactly when and where the oracle halts."""
    verified = []
    for start, left, head, right in HALTING_TAPES:
        t = tape_normalize(tape(left, head, right))
        oracle = tm_run(TmConfig(t, start), program, 50)
        assert oracle.halted, (start, left, head, right)
        halt_step = oracle.config.steps

        state = build_initial_state(BoardRecipe(program=program, tape=t, start_state=start))
        sink = ListSink()
        engine = GameEngine(state, sink=sink)
        steps = 0
        report = None
        while state.outcome is Outcome.ONGOING and steps < 60:
            report = engine.run_computational_step()
            steps += 1
            if report.halted:
                break
        assert state.outcome is Outcome.ALICE_WINS
        assert steps == halt_step
        assert report.alice_turns == 3  # Coalition Victory is the third cast
        wins = [e for e in sink.events if e.kind is EventKind.WIN]
        assert len(wins) == 1 and wins[0].payload["via"] == "Coalition Victory"
        assassins = [
            p
            for p in state.permanents.values()
            if p.is_token
            and "Assassin" in p.creature_types
            and p.colors == frozenset((Color.BLUE,))
        ]
        assert len(assassins) == 1
        assert assassins[0].controller == ALICE
        verified.append(halt_step)
    report_pass("halting-claim", f"10 tapes, halt steps {sorted(verified)}")


def test_criterion_4_out_of_tape(program):
    """Dual-sided growth: the head leaves both ends and blank cells appear,
    with end markers one beyond the outermost cell at every boundary."""
    start = TmState.Q1
    t = tape(head="Basilisk")  # single cell; off the right end at step 1,
    # off the left end from step 3 onward
    state = build_initial_state(BoardRecipe(program=program, tape=t, start_state=start))
    engine = GameEngine(state)
    oracle = TmConfig(t, start)
    off_right = off_left = False
    blanks_seen = 0
    from mtg_turing.verify import check_marker_law

    for step in range(1, 101):
        oracle = tm_step(oracle, program)
        engine.run_computational_step()
        extracted = extract_config(state)
        assert (extracted.tape, extracted.state) == (tape_normalize(oracle.tape), oracle.state)
        check_marker_law(state)
        if oracle.tape.head is BLANK and not oracle.tape.right:
            off_right = True
        if oracle.tape.head is BLANK and not oracle.tape.left:
            off_left = True
        blanks_seen = max(
            blanks_seen,
            sum(1 for s in extracted.tape.left + extracted.tape.right if s is BLANK),
        )
    assert off_right and off_left
    assert blanks_seen > 0
    assert extracted.tape.cells() > t.cells()
    report_pass(
        "out-of-tape",
        f"100 steps, grew to {extracted.tape.cells()} cells, markers intact each boundary",
    )


class _ImmortalityMonitor:
    """Streaming sink: collects deaths without retaining the bulky events."""

    def __init__(self):
        self.nontoken_deaths = Counter()
        self.token_deaths = 0

    def emit(self, event):
        if event.kind is EventKind.DEATH:
            if event.payload["token"]:
                self.token_deaths += 1
            else:
                self.nontoken_deaths[event.payload["name"]] += 1


def test_criterion_5_infrastructure_immortality(program):
    """1000 steps: only tokens and the Soul Snuffers body ever die, and the
    Vigors never shrink across step boundaries."""
    state = build_initial_state(
        BoardRecipe(program=program, tape=tape(head="Cephalid"), start_state=TmState.Q1)
    )
    monitor = _ImmortalityMonitor()
    engine = GameEngine(state, sink=monitor)
    vigors = [p for p in state.permanents.values() if p.has(BehaviorKind.VIGOR)]
    assert len(vigors) == 2
    last = {p.id: effective_stats(p, state)[1] for p in vigors}
    for _ in range(1000):
        engine.run_computational_step()
        for p in vigors:
            now = effective_stats(p, state)[1]
            assert now >= last[p.id], f"Vigor shrank: {last[p.id]} -> {now}"
            last[p.id] = now
    assert set(monitor.nontoken_deaths) == {"Soul Snuffers"}
    assert monitor.nontoken_deaths["Soul Snuffers"] == 1000  # one body per cycle
    report_pass(
        "infrastructure-immortality",
        f"1000 steps, {monitor.token_deaths} token deaths, "
        f"{monitor.nontoken_deaths['Soul Snuffers']} Soul Snuffers bodies, Vigors non-decreasing",
    )


def test_criterion_6_forced_line_audit(program, corpus):
    """Zero audit violations over the corpus; fault injections are caught."""
    for case in corpus.cases:
        assert case.audit is not None and case.audit.ok, case.audit.violations[:3]

    # Fault 1: remove Steely Resolve -> Cleansing Beam sees several targets.
    state = build_initial_state(
        BoardRecipe(program=program, tape=tape(head="Aetherborn"), start_state=TmState.Q1)
    )
    steely = next(p for p in state.permanents.values() if p.has(BehaviorKind.STEELY_RESOLVE))
    del state.permanents[steely.id]
    sink = ListSink()
    engine = GameEngine(state, sink=sink)
    with pytest.raises(ForcedMoveViolation):
        for _ in range(3):
            engine.advance_turn()
    from mtg_turing.verify import audit_forced_moves

    assert not audit_forced_moves(sink.events).ok

    # Fault 2: flip one tape token's color -> lockstep diverges immediately.
    t = tape(left=("Elf",), head="Aetherborn", right=("Myr",))
    state = build_initial_state(BoardRecipe(program=program, tape=t, start_state=TmState.Q1))
    elf = next(p for p in state.permanents.values() if p.is_token and p.name == "Elf")
    elf.colors = frozenset((Color.WHITE,))
    engine = GameEngine(state)
    oracle = tm_step(TmConfig(tape_normalize(t), TmState.Q1), program)
    detected = False
    try:
        engine.run_computational_step()
        got = extract_config(state)
        detected = (got.tape, got.state) != (tape_normalize(oracle.tape), oracle.state)
    except Exception:
        detected = True
    assert detected
    report_pass("forced-line-audit", f"{len(corpus.cases)} clean traces, both faults detected")


def test_criterion_7_determinism(program, tmp_path, capsys):
    """Identical invocations give byte-identical traces and board dumps."""
    tape_file = tmp_path / "t.tape"
    tape_file.write_text(json.dumps({"state": "q1", "left": ["Kavu"], "head": "Pegasus", "right": []}))
    outputs, traces = [], []
    for name in ("a", "b"):
        trace = tmp_path / f"{name}.trace"
        code = main(
            ["run", "--tape", str(tape_file), "--max-steps", "25", "--trace", str(trace)]
        )
        assert code == 0
        outputs.append(capsys.readouterr().out)
        traces.append(trace.read_bytes())
    assert outputs[0] == outputs[1]
    assert traces[0] == traces[1] and traces[0]

    dumps = []
    for _ in range(2):
        main(["dump-board", "--tape", str(tape_file)])
        dumps.append(capsys.readouterr().out)
    assert dumps[0] == dumps[1]

    digests = set()
    for _ in range(2):
        rep = verify_random_cases(program, cases=3, steps=20, seed=5)
        digests.add(tuple(c.trace_digest for c in rep.cases))
    assert len(digests) == 1
    report_pass("determinism", "run/trace/dump/verify all byte-identical across repeats")


def test_criterion_8_table_one_census(program):
    """The compiled initial board matches the Table I transcription."""
    state = build_initial_state(
        BoardRecipe(program=program, tape=tape(head="Cephalid"), start_state=TmState.Q1)
    )
    census = Counter((p.name, p.controller) for p in state.permanents.values() if not p.is_token)
    with open(GOLDEN, newline="") as fh:
        expected = {(r["name"], r["controller"]): int(r["count"]) for r in csv.DictReader(fh)}
    assert dict(census) == expected
    cloaks = sum(1 for p in state.permanents.values() if p.name == "Cloak of Invisibility")
    rules = sum(
        1
        for p in state.permanents.values()
        if any(b.rule_state is not None for b in p.behaviors)
    )
    assert cloaks == 36 and rules == 36
    report_pass("table-i-census", f"{sum(expected.values())} permanents match the golden census")
