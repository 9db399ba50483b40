"""Direct interpreter for Rogozhin's (2,18) universal Turing machine.

The machine is kept as data: one ``RuleCardSpec`` per (state, symbol) pair,
loaded from a manifest file. The same 36 rows drive both this interpreter
and the battlefield compiler, so the interpreter doubles as the ground-truth
oracle for the game simulation.

Symbols are named by the eighteen creature types that represent them on the
battlefield (Aetherborn .. Sliver, alphabetical). The blank symbol is index
3 (Cephalid). Result colors encode head movement: a white result moves the
head left, a green result moves it right, and the single blue result is the
halt signal.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import IO, Iterable, Sequence

CREATURE_TYPES: tuple[str, ...] = (
    "Aetherborn", "Basilisk", "Cephalid", "Demon", "Elf", "Faerie",
    "Giant", "Harpy", "Illusion", "Juggernaut", "Kavu", "Leviathan",
    "Myr", "Noggle", "Orc", "Pegasus", "Rhino", "Sliver",
)

# Display-only transliteration of Rogozhin's symbol names, row order as above.
ROGOZHIN_LABELS: tuple[str, ...] = (
    "1", "1→", "1←", "1→1", "1←1", "b", "b→", "b←", "b→1", "b←1",
    "b2", "b3", "c", "c→", "c←", "c→1", "c←1", "c2",
)

BLANK_INDEX = 3  # Cephalid

DEFAULT_MANIFEST_NAME = "rogozhin_2_18.manifest"

HALT_RESULT_TYPE = "Assassin"


class TmState(Enum):
    Q1 = "q1"
    Q2 = "q2"
    HALTED = "halted"

    def flipped(self) -> "TmState":
        if self is TmState.Q1:
            return TmState.Q2
        if self is TmState.Q2:
            return TmState.Q1
        raise ValueError("HALTED has no counterpart state")


class Direction(Enum):
    LEFT = "left"
    RIGHT = "right"


class ResultColor(Enum):
    WHITE = "white"
    GREEN = "green"
    BLUE = "blue"


# White results move the head left, green results move it right.
_DIRECTION_BY_COLOR = {
    ResultColor.WHITE: Direction.LEFT,
    ResultColor.GREEN: Direction.RIGHT,
}


@dataclass(frozen=True)
class TmSymbol:
    """One of the eighteen tape symbols, named by its creature type."""

    index: int
    creature_type: str
    rogozhin_label: str

    def __repr__(self) -> str:
        return f"TmSymbol({self.index}, {self.creature_type!r})"


SYMBOLS: tuple[TmSymbol, ...] = tuple(
    TmSymbol(i + 1, name, ROGOZHIN_LABELS[i]) for i, name in enumerate(CREATURE_TYPES)
)

BLANK: TmSymbol = SYMBOLS[BLANK_INDEX - 1]

_SYMBOL_BY_TYPE = {s.creature_type: s for s in SYMBOLS}


def symbol(index: int) -> TmSymbol:
    if not 1 <= index <= 18:
        raise ValueError(f"symbol index out of range: {index}")
    return SYMBOLS[index - 1]


def symbol_by_type(creature_type: str) -> TmSymbol:
    try:
        return _SYMBOL_BY_TYPE[creature_type]
    except KeyError:
        raise ValueError(f"not a tape creature type: {creature_type!r}") from None


class ManifestError(ValueError):
    """Raised when a program manifest cannot be parsed or fails validation."""


@dataclass(frozen=True)
class RuleCardSpec:
    """One transition rule: (state, trigger symbol) -> token to create.

    ``result_tapped`` marks the seven state-changing rules (the Xathrid
    Necromancer rows); ``is_halt`` marks the single blue Assassin row.
    """

    state: TmState
    trigger_type: TmSymbol
    result_tapped: bool
    result_color: ResultColor
    result_type: str
    is_halt: bool = False

    @property
    def direction(self) -> Direction | None:
        """Head movement implied by the result color; None for the halt rule."""
        if self.is_halt:
            return None
        return _DIRECTION_BY_COLOR[self.result_color]


@dataclass
class ProgramReport:
    """Validation outcome for a rule table. ``ok`` is False iff violations exist."""

    violations: list[str] = field(default_factory=list)
    rule_count: int = 0
    tapped_count: int = 0
    halt_count: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_program(specs: Sequence[RuleCardSpec]) -> ProgramReport:
    """Check 2x18 coverage, halt uniqueness, and per-row consistency."""
    report = ProgramReport(rule_count=len(specs))
    seen: dict[tuple[TmState, int], int] = {}
    for spec in specs:
        key = (spec.state, spec.trigger_type.index)
        seen[key] = seen.get(key, 0) + 1
        if spec.state not in (TmState.Q1, TmState.Q2):
            report.violations.append(f"rule for {key}: bad state {spec.state}")
        if spec.result_tapped:
            report.tapped_count += 1
        if spec.is_halt:
            report.halt_count += 1
            if spec.result_color is not ResultColor.BLUE or spec.result_type != HALT_RESULT_TYPE:
                report.violations.append(
                    f"halt rule for {key} must create a blue {HALT_RESULT_TYPE}"
                )
            if spec.result_tapped:
                report.violations.append(f"halt rule for {key} cannot be tapped")
        else:
            if spec.result_color is ResultColor.BLUE or spec.result_type == HALT_RESULT_TYPE:
                report.violations.append(
                    f"rule for {key}: blue/{HALT_RESULT_TYPE} result is reserved for the halt rule"
                )
            if spec.result_color not in (ResultColor.WHITE, ResultColor.GREEN):
                report.violations.append(f"rule for {key}: bad color {spec.result_color}")
            if spec.result_type not in _SYMBOL_BY_TYPE:
                report.violations.append(f"rule for {key}: bad result type {spec.result_type!r}")

    for (state, idx), n in sorted(seen.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        if n > 1:
            report.violations.append(f"duplicate rule for ({state.value}, {symbol(idx).creature_type})")
    for state in (TmState.Q1, TmState.Q2):
        for idx in range(1, 19):
            if (state, idx) not in seen:
                report.violations.append(f"missing rule for ({state.value}, {symbol(idx).creature_type})")
    if report.halt_count != 1:
        report.violations.append(f"expected exactly one halt rule, found {report.halt_count}")
    return report


_MANIFEST_FIELDS = ["state", "trigger_type", "tapped", "color", "result_type", "halt"]


def _parse_bool(text: str, line: int) -> bool:
    value = text.strip().lower()
    if value == "true":
        return True
    if value == "false":
        return False
    raise ManifestError(f"line {line}: expected true/false, got {text!r}")


def load_manifest(source: str | IO[bytes] | IO[str]) -> list[RuleCardSpec]:
    """Parse and validate a program manifest (CSV with a header line).

    ``source`` may be a filesystem path or an open text/byte stream.
    Raises ManifestError on parse failures or an invalid rule table.
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_manifest(fh)
    raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")

    reader = csv.reader(io.StringIO(raw))
    rows = [row for row in reader]
    if not rows:
        raise ManifestError("empty manifest")
    header = [cell.strip() for cell in rows[0]]
    if header != _MANIFEST_FIELDS:
        raise ManifestError(f"bad header: expected {_MANIFEST_FIELDS}, got {header}")

    specs: list[RuleCardSpec] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(_MANIFEST_FIELDS):
            raise ManifestError(f"line {lineno}: expected {len(_MANIFEST_FIELDS)} fields, got {len(row)}")
        state_text, trig_text, tapped_text, color_text, result_text, halt_text = (
            cell.strip() for cell in row
        )
        try:
            state = TmState(state_text.lower())
        except ValueError:
            raise ManifestError(f"line {lineno}: bad state {state_text!r}") from None
        if state is TmState.HALTED:
            raise ManifestError(f"line {lineno}: rules cannot fire from the halted state")
        try:
            trigger = symbol_by_type(trig_text)
        except ValueError:
            raise ManifestError(f"line {lineno}: bad trigger type {trig_text!r}") from None
        try:
            color = ResultColor(color_text.lower())
        except ValueError:
            raise ManifestError(f"line {lineno}: bad color {color_text!r}") from None
        specs.append(
            RuleCardSpec(
                state=state,
                trigger_type=trigger,
                result_tapped=_parse_bool(tapped_text, lineno),
                result_color=color,
                result_type=result_text,
                is_halt=_parse_bool(halt_text, lineno),
            )
        )

    report = validate_program(specs)
    if not report.ok:
        raise ManifestError("invalid program: " + "; ".join(report.violations))
    return specs


def load_default_program() -> list[RuleCardSpec]:
    """Load the bundled 36-rule table."""
    path = resources.files("mtg_turing.data").joinpath(DEFAULT_MANIFEST_NAME)
    with path.open("r", encoding="utf-8") as fh:
        return load_manifest(fh)


@dataclass(frozen=True)
class TmTape:
    """Two-sided tape; ``left``/``right`` are nearest-first, blanks implied beyond."""

    left: tuple[TmSymbol, ...]
    head: TmSymbol
    right: tuple[TmSymbol, ...]

    def cells(self) -> int:
        return len(self.left) + 1 + len(self.right)


def _strip_trailing_blanks(side: tuple[TmSymbol, ...]) -> tuple[TmSymbol, ...]:
    n = len(side)
    while n and side[n - 1] is BLANK:
        n -= 1
    return side[:n]


def tape_normalize(tape: TmTape) -> TmTape:
    """Drop trailing (outermost) blanks from both sides. Idempotent."""
    left = _strip_trailing_blanks(tape.left)
    right = _strip_trailing_blanks(tape.right)
    if left is tape.left and right is tape.right:
        return tape
    return TmTape(left, tape.head, right)


@dataclass(frozen=True)
class TmConfig:
    """Machine configuration: tape, control state, and steps applied so far."""

    tape: TmTape
    state: TmState
    steps: int = 0


def _rule_index(program: Sequence[RuleCardSpec]) -> dict[tuple[TmState, int], RuleCardSpec]:
    return {(r.state, r.trigger_type.index): r for r in program}


def tm_step(
    config: TmConfig,
    program: Sequence[RuleCardSpec],
    _index: dict[tuple[TmState, int], RuleCardSpec] | None = None,
) -> TmConfig:
    """Apply exactly one rule. Raises if the machine has already halted.

    On the halt rule the tape is left untouched; the step counter still
    advances so game-side and oracle-side step counts agree at the cycle
    in which the halt signal appears.
    """
    if config.state is TmState.HALTED:
        raise ValueError("cannot step a halted machine")
    index = _index if _index is not None else _rule_index(program)
    rule = index[(config.state, config.tape.head.index)]
    if rule.is_halt:
        return TmConfig(config.tape, TmState.HALTED, config.steps + 1)

    written = symbol_by_type(rule.result_type)
    tape = config.tape
    if rule.direction is Direction.LEFT:
        head = tape.left[0] if tape.left else BLANK
        new_tape = TmTape(tape.left[1:], head, (written,) + tape.right)
    else:
        head = tape.right[0] if tape.right else BLANK
        new_tape = TmTape((written,) + tape.left, head, tape.right[1:])
    state = config.state.flipped() if rule.result_tapped else config.state
    return TmConfig(new_tape, state, config.steps + 1)


@dataclass
class RunResult:
    """Outcome of ``tm_run``: final configuration plus optional history."""

    config: TmConfig
    halted: bool
    history: list[TmConfig] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.config.steps


def tm_run(
    config: TmConfig,
    program: Sequence[RuleCardSpec],
    max_steps: int,
    record_history: bool = False,
) -> RunResult:
    """Run until halt or until ``max_steps`` rules have been applied."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    index = _rule_index(program)
    history: list[TmConfig] = []
    current = config
    for _ in range(max_steps):
        if current.state is TmState.HALTED:
            break
        current = tm_step(current, program, _index=index)
        if record_history:
            history.append(current)
    return RunResult(config=current, halted=current.state is TmState.HALTED, history=history)


def parse_tape_json(data: dict) -> tuple[TmTape, TmState | None]:
    """Build a tape (and optional start state) from the tape-file dict form."""
    try:
        left = tuple(symbol_by_type(t) for t in data.get("left", []))
        head = symbol_by_type(data["head"])
        right = tuple(symbol_by_type(t) for t in data.get("right", []))
    except KeyError as exc:
        raise ValueError(f"tape file missing field: {exc}") from None
    state: TmState | None = None
    if "state" in data and data["state"] is not None:
        state = TmState(str(data["state"]).lower())
        if state is TmState.HALTED:
            raise ValueError("tape file cannot start halted")
    return TmTape(left, head, right), state


def tape_to_json(tape: TmTape, state: TmState | None = None) -> dict:
    data: dict = {}
    if state is not None:
        data["state"] = state.value
    data.update(
        {
            "left": [s.creature_type for s in tape.left],
            "head": tape.head.creature_type,
            "right": [s.creature_type for s in tape.right],
        }
    )
    return data
