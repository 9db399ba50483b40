"""Extracts machine configurations from boards and proves lockstep equivalence.

The direct interpreter is the oracle. A verification case builds a board
from a recipe, runs the oracle and the game side by side, and demands exact
equality of the extracted configuration at every step boundary, plus
agreement on the halting step and on cycle lengths.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .compiler import BoardRecipe, build_initial_state
from .engine import EngineError, GameEngine, StepReport
from .machine import (
    BLANK,
    RuleCardSpec,
    SYMBOLS,
    TmConfig,
    TmState,
    TmTape,
    symbol_by_type,
    tape_normalize,
    tm_step,
)
from .model import (
    BehaviorKind,
    Color,
    GameState,
    Outcome,
    Permanent,
    anthem_tables,
    effective_stats,
)
from .trace import DigestSink, EventKind, TeeSink, TraceEvent

TAPE_CREATURE_TYPES = frozenset(s.creature_type for s in SYMBOLS)


class ExtractionError(ValueError):
    """The battlefield does not encode a machine configuration."""


def _tape_side(tokens: list[tuple[int, Permanent]], side: str) -> tuple:
    """Order one side's tokens nearest-first and check the distance ladder."""
    tokens.sort(key=lambda item: item[0])
    expected = 3
    out = []
    for toughness, perm in tokens:
        if toughness != expected:
            raise ExtractionError(
                f"{side} side: expected a token at effective toughness {expected}, "
                f"found {perm.name} at {toughness}"
            )
        expected += 1
        out.append(perm)
    return tuple(out)


@dataclass
class _TokenScan:
    heads: list[Permanent] = field(default_factory=list)
    greens: list[tuple[int, Permanent]] = field(default_factory=list)  # (toughness, token)
    whites: list[tuple[int, Permanent]] = field(default_factory=list)
    markers: dict[str, tuple[int, Permanent]] = field(default_factory=dict)


def _scan_tape_tokens(state: GameState, tables) -> _TokenScan:
    scan = _TokenScan()
    for p in state.visible():
        if not p.is_token or not p.is_creature:
            continue
        marker_tag = p.behavior(BehaviorKind.END_MARKER)
        if marker_tag is not None:
            if marker_tag.marker in scan.markers:
                raise ExtractionError(f"duplicate {marker_tag.marker} end marker")
            _, toughness = effective_stats(p, state, tables)
            scan.markers[marker_tag.marker] = (toughness, p)
            continue
        if not p.has(BehaviorKind.TAPE_TOKEN):
            continue
        types = p.creature_types & TAPE_CREATURE_TYPES
        if len(types) != 1:
            raise ExtractionError(f"tape token {p.id} has types {sorted(p.creature_types)}")
        power, toughness = effective_stats(p, state, tables)
        if (power, toughness) == (2, 2):
            scan.heads.append(p)
        elif p.colors == frozenset((Color.GREEN,)):
            scan.greens.append((toughness, p))
        elif p.colors == frozenset((Color.WHITE,)):
            scan.whites.append((toughness, p))
        else:
            raise ExtractionError(
                f"tape token {p.id} ({p.name}) has colors {sorted(c.value for c in p.colors)}"
            )
    return scan


def _token_symbol(p: Permanent):
    return symbol_by_type(next(iter(p.creature_types & TAPE_CREATURE_TYPES)))


def extract_config(state: GameState, tables=None) -> TmConfig:
    """Read the abstract configuration off a board at a step boundary.

    The head is the unique tape-type token at effective 2/2. When the head
    has walked past the initialized tape, the 2/2 is an end marker and the
    head cell reads blank; after the win the head cell is simply gone (the
    halt Assassin replaced it) and likewise reads blank. The control state
    is taken from the phased-in rule set, or HALTED from the outcome.

    The returned config is normalized; its ``steps`` field is always 0
    because step counts are not recoverable from a battlefield.
    """
    if tables is None:
        tables = anthem_tables(state)
    scan = _scan_tape_tokens(state, tables)
    left = tuple(_token_symbol(p) for p in _tape_side(scan.greens, "left"))
    right = tuple(_token_symbol(p) for p in _tape_side(scan.whites, "right"))

    if len(scan.heads) > 1:
        names = ", ".join(f"{p.name}#{p.id}" for p in scan.heads)
        raise ExtractionError(f"multiple 2/2 tape tokens: {names}")
    if len(scan.heads) == 1:
        head = _token_symbol(scan.heads[0])
    elif state.outcome is Outcome.ALICE_WINS:
        head = BLANK  # the halt signal consumed the head cell
    else:
        # Off the initialized tape: the 2/2 is an end marker, so the head
        # sits on uninitialized space, which reads blank.
        at_two = [m for m, (t, _) in scan.markers.items() if t == 2]
        if len(at_two) != 1:
            raise ExtractionError("no 2/2 tape token and no end marker at the head position")
        if at_two[0] == "Lhurgoyf" and left:
            raise ExtractionError("left marker at head position but left side not empty")
        if at_two[0] == "Rat" and right:
            raise ExtractionError("right marker at head position but right side not empty")
        head = BLANK

    if state.outcome is Outcome.ALICE_WINS:
        tm_state = TmState.HALTED
    else:
        tm_state = _phase_partition(state)

    return TmConfig(tape_normalize(TmTape(left, head, right)), tm_state, steps=0)


def _phase_partition(state: GameState) -> TmState:
    """Control state read off the rule cards: exactly one state's set phased in."""
    phased_in = {TmState.Q1: 0, TmState.Q2: 0}
    phased_out = {TmState.Q1: 0, TmState.Q2: 0}
    for p in state.battlefield():
        for b in p.behaviors:
            if b.rule_state is not None and b.kind in (
                BehaviorKind.ROTLUNG_TRIGGER,
                BehaviorKind.XATHRID_TRIGGER,
            ):
                (phased_out if p.phased_out else phased_in)[b.rule_state] += 1
    if phased_in[TmState.Q1] and not phased_out[TmState.Q1] and not phased_in[TmState.Q2]:
        return TmState.Q1
    if phased_in[TmState.Q2] and not phased_out[TmState.Q2] and not phased_in[TmState.Q1]:
        return TmState.Q2
    raise ExtractionError(
        "ambiguous phase partition: "
        f"q1 in/out={phased_in[TmState.Q1]}/{phased_out[TmState.Q1]}, "
        f"q2 in/out={phased_in[TmState.Q2]}/{phased_out[TmState.Q2]}"
    )


def check_marker_law(state: GameState, tables=None) -> None:
    """End markers must sit exactly one beyond the outermost cell of their side.

    When the head has walked off one end, that side is empty and its marker
    holds the head position (effective 2) instead.
    """
    if tables is None:
        tables = anthem_tables(state)
    scan = _scan_tape_tokens(state, tables)
    head_exists = bool(scan.heads) or state.outcome is Outcome.ALICE_WINS
    for marker, side in (("Lhurgoyf", scan.greens), ("Rat", scan.whites)):
        if marker not in scan.markers:
            raise ExtractionError(f"missing {marker} end marker")
        toughness = scan.markers[marker][0]
        if side:
            expected = max(t for t, _ in side) + 1
        elif head_exists:
            expected = 3
        else:
            # This side may hold the off-tape head position (2); the other
            # empty side still needs its marker one beyond the head (3).
            if toughness not in (2, 3):
                raise ExtractionError(
                    f"{marker} marker at {toughness} beside an empty side with no head"
                )
            continue
        if toughness != expected:
            raise ExtractionError(
                f"{marker} marker at effective toughness {toughness}, expected {expected}"
            )


# --- forced-line audit ----------------------------------------------------------


@dataclass
class AuditReport:
    violations: list[str] = field(default_factory=list)
    forced_casts: int = 0
    deaths: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


class AuditAccumulator:
    """Streaming audit over trace events; usable as a trace sink."""

    def __init__(self) -> None:
        self.report = AuditReport()
        self._infest_kills_this_turn: int | None = None
        self._infest_turn: int | None = None

    def emit(self, event: TraceEvent) -> None:
        self.feed(event)

    def feed(self, event: TraceEvent) -> None:
        rep = self.report
        if event.kind is EventKind.FORCED_CAST:
            rep.forced_casts += 1
            hand = event.payload.get("hand_size")
            if hand != 1:
                rep.violations.append(
                    f"turn {event.turn}: forced cast of {event.payload.get('card')} "
                    f"with hand size {hand}"
                )
            if "legal_targets" in event.payload and event.payload["legal_targets"] != 1:
                rep.violations.append(
                    f"turn {event.turn}: {event.payload.get('card')} had "
                    f"{event.payload['legal_targets']} legal targets"
                )
            if event.payload.get("card") == "Infest":
                self._infest_turn = event.turn
                self._infest_kills_this_turn = 0
        elif event.kind is EventKind.DEATH:
            rep.deaths += 1
            tags = event.payload.get("tags", [])
            if event.turn == self._infest_turn and (
                BehaviorKind.TAPE_TOKEN.value in tags or BehaviorKind.END_MARKER.value in tags
            ):
                self._infest_kills_this_turn += 1
                if self._infest_kills_this_turn > 1:
                    rep.violations.append(
                        f"turn {event.turn}: more than one tape/marker death after Infest"
                    )

    def finish(self) -> AuditReport:
        return self.report


def audit_forced_moves(events: Iterable[TraceEvent]) -> AuditReport:
    """Check a trace for any point where the game line was not forced."""
    acc = AuditAccumulator()
    for event in events:
        acc.feed(event)
    return acc.finish()


# --- lockstep verification --------------------------------------------------------


@dataclass
class StepRecord:
    step: int
    alice_turns: int
    rule_tapped: bool
    halted: bool


@dataclass
class CaseResult:
    label: str
    tape: TmTape
    start_state: TmState
    steps_run: int = 0
    halted_at: int | None = None
    won_at: int | None = None
    divergence: str | None = None
    turn_mismatches: list[int] = field(default_factory=list)
    audit: AuditReport | None = None
    trace_digest: str | None = None
    step_records: list[StepRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.divergence is None
            and not self.turn_mismatches
            and (self.audit is None or self.audit.ok)
            and self.halted_at == self.won_at
        )


def _describe_config(config: TmConfig) -> str:
    tape = config.tape
    return (
        f"state={config.state.value} "
        f"left=[{','.join(s.creature_type for s in tape.left)}] "
        f"head={tape.head.creature_type} "
        f"right=[{','.join(s.creature_type for s in tape.right)}]"
    )


def lockstep_verify(
    recipe: BoardRecipe,
    max_steps: int,
    label: str = "case",
    sink=None,
    check_markers: bool = True,
    same_controller_order=None,
) -> CaseResult:
    """Run oracle and game side by side, comparing at every step boundary."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    result = CaseResult(label=label, tape=tape_normalize(recipe.tape), start_state=recipe.start_state)
    digest = DigestSink()
    audit = AuditAccumulator()
    sinks = [digest, audit] + ([sink] if sink is not None else [])
    state = build_initial_state(recipe)
    engine = GameEngine(state, sink=TeeSink(sinks), same_controller_order=same_controller_order)
    oracle = TmConfig(result.tape, recipe.start_state)
    index = {(r.state, r.trigger_type.index): r for r in recipe.program}

    def fail(step: int, message: str) -> None:
        if result.divergence is None:
            result.divergence = f"step {step}: {message}"

    try:
        initial = extract_config(state)
        if (initial.tape, initial.state) != (oracle.tape, oracle.state):
            fail(0, f"initial board decodes to {_describe_config(initial)}, expected {_describe_config(oracle)}")
    except ExtractionError as exc:
        fail(0, f"extraction failed: {exc}")

    for step in range(1, max_steps + 1):
        if result.divergence is not None:
            break
        rule = index[(oracle.state, oracle.tape.head.index)]
        expected = tm_step(oracle, recipe.program)
        try:
            report: StepReport = engine.run_computational_step()
        except EngineError as exc:
            fail(step, f"engine error: {exc}")
            break
        result.steps_run = step
        result.step_records.append(
            StepRecord(step, report.alice_turns, rule.result_tapped, report.halted)
        )
        if report.halted:
            result.won_at = step
            if expected.state is not TmState.HALTED:
                fail(step, "game won but oracle is still running")
            else:
                result.halted_at = step
                # The win fires on the cycle's third turn, before Soul Snuffers.
                if report.alice_turns != 3:
                    fail(step, f"win on Alice turn {report.alice_turns}, expected 3")
                try:
                    final = extract_config(state)
                    want = tape_normalize(expected.tape)
                    if (final.tape.left, final.tape.right) != (want.left, want.right):
                        fail(step, "final tape sides diverge from the oracle")
                    if final.state is not TmState.HALTED:
                        fail(step, "extracted state is not halted after the win")
                except ExtractionError as exc:
                    fail(step, f"extraction failed after win: {exc}")
            break
        if expected.state is TmState.HALTED:
            fail(step, "oracle halted but the game played on")
            break
        oracle = expected
        if report.alice_turns != (3 if rule.result_tapped else 4):
            result.turn_mismatches.append(step)
        try:
            tables = anthem_tables(state)
            extracted = extract_config(state, tables)
            want = tape_normalize(oracle.tape)
            if (extracted.tape, extracted.state) != (want, oracle.state):
                fail(
                    step,
                    f"board decodes to {_describe_config(extracted)}, "
                    f"expected {_describe_config(TmConfig(want, oracle.state))}",
                )
            if check_markers:
                check_marker_law(state, tables)
        except ExtractionError as exc:
            fail(step, f"extraction failed: {exc}")
    else:
        if result.divergence is None and state.outcome is Outcome.ONGOING:
            state.outcome = Outcome.STEP_LIMIT

    result.audit = audit.finish()
    result.trace_digest = digest.hexdigest()
    return result


def random_recipe(
    rng: random.Random,
    program: Sequence[RuleCardSpec],
    max_side: int = 8,
) -> BoardRecipe:
    """Recipe with uniform random symbols, sides up to ``max_side`` cells each."""
    left = tuple(SYMBOLS[rng.randrange(18)] for _ in range(rng.randint(0, max_side)))
    right = tuple(SYMBOLS[rng.randrange(18)] for _ in range(rng.randint(0, max_side)))
    head = SYMBOLS[rng.randrange(18)]
    state = TmState.Q1 if rng.random() < 0.5 else TmState.Q2
    return BoardRecipe(
        program=tuple(program),
        tape=tape_normalize(TmTape(left, head, right)),
        start_state=state,
    )


@dataclass
class VerifyRunReport:
    seed: int
    cases: list[CaseResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cases)

    @property
    def failed(self) -> list[CaseResult]:
        return [c for c in self.cases if not c.ok]


def verify_random_cases(
    program: Sequence[RuleCardSpec],
    cases: int,
    steps: int,
    seed: int,
) -> VerifyRunReport:
    """Seeded batch of random lockstep cases; the acceptance suite's workhorse."""
    rng = random.Random(seed)
    report = VerifyRunReport(seed=seed)
    for i in range(cases):
        recipe = random_recipe(rng, program)
        report.cases.append(lockstep_verify(recipe, steps, label=f"case-{i:03d}"))
    return report
