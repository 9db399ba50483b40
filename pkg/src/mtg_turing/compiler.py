"""Compiles a rule table and an abstract tape into the initial battlefield.

The output battlefield encodes a machine configuration the same way every
later step boundary does: the head cell is the unique effective 2/2 tape
token, cells at distance d sit at effective (d+2)/(d+2), green tokens are
the left side and white tokens the right side, and a green Lhurgoyf / white
Rat pair marks the ends of initialized tape one step beyond the outermost
cell on each side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .machine import (
    CREATURE_TYPES,
    ResultColor,
    RuleCardSpec,
    TmState,
    TmTape,
    tape_normalize,
)
from .model import (
    ALICE,
    BOB,
    Behavior,
    BehaviorKind,
    Color,
    GameState,
    INFRASTRUCTURE_COLORS,
    Permanent,
    PlayerZone,
)

RESULT_COLOR_MAP = {
    ResultColor.WHITE: Color.WHITE,
    ResultColor.GREEN: Color.GREEN,
    ResultColor.BLUE: Color.BLUE,
}

# Alice's spell cycle. Infest starts in hand; the library holds the rest in
# casting order (top first).
HAND_CARD = "Infest"
LIBRARY_CARDS = ("Cleansing Beam", "Coalition Victory", "Soul Snuffers")

# Initial +1/+1 counters on every 2/2-base infrastructure creature. The two
# Dread of Night give black infrastructure a standing -2/-2 and the first
# Infest another -2/-2, so base 2/2 bodies need at least 3 counters to see
# their first Cleansing Beam; after that the per-cycle net is non-negative.
INFRA_STARTING_COUNTERS = 3

MARKER_TYPES = {"left": "Lhurgoyf", "right": "Rat"}


@dataclass(frozen=True)
class BoardRecipe:
    program: tuple[RuleCardSpec, ...]
    tape: TmTape
    start_state: TmState
    head_token_color: Color = Color.GREEN
    # The active tape cell must belong to Bob or the seven state-changing
    # triggers ("... creature you control dies") never see it die.
    head_token_controller: str = BOB

    def __post_init__(self) -> None:
        if self.start_state not in (TmState.Q1, TmState.Q2):
            raise ValueError("start_state must be q1 or q2")


class _Builder:
    def __init__(self) -> None:
        self.state = GameState()
        self.state.players = {
            ALICE: PlayerZone(ALICE, hand=[HAND_CARD], library=list(LIBRARY_CARDS)),
            BOB: PlayerZone(BOB),
        }

    def add(self, perm: Permanent) -> Permanent:
        self.state.permanents[perm.id] = perm
        return perm

    def new(self, **kwargs) -> Permanent:
        pid = self.state.new_id()
        kwargs.setdefault("natural_controller", kwargs["controller"])
        return self.add(Permanent(id=pid, timestamp=pid, **kwargs))

    def attach(self, aura: Permanent, host: Permanent) -> None:
        aura.attached_to = host.id
        host.attachments.add(aura.id)


def _program_card(builder: _Builder, rule: RuleCardSpec, start_state: TmState) -> Permanent:
    tapped_result = rule.result_tapped
    name = "Xathrid Necromancer" if tapped_result else "Rotlung Reanimator"
    types = frozenset(("Human", "Wizard")) if tapped_result else frozenset(("Zombie", "Cleric"))
    kind = BehaviorKind.XATHRID_TRIGGER if tapped_result else BehaviorKind.ROTLUNG_TRIGGER
    card = builder.new(
        name=name,
        controller=BOB,
        base_power=2,
        base_toughness=2,
        colors=INFRASTRUCTURE_COLORS,
        creature_types=types,
        is_creature=True,
        has_phasing=True,
        phased_out=(rule.state is not start_state),
        plus_counters=INFRA_STARTING_COUNTERS,
        behaviors=(
            Behavior(
                kind=kind,
                trigger_type=rule.trigger_type.creature_type,
                result_color=RESULT_COLOR_MAP[rule.result_color],
                result_type=rule.result_type,
                result_tapped=tapped_result,
                is_halt=rule.is_halt,
                controller_restricted=tapped_result,
                rule_state=rule.state,
            ),
        ),
    )
    return card


def instantiate_program_cards(
    builder: _Builder, program: tuple[RuleCardSpec, ...], start_state: TmState
) -> list[Permanent]:
    """All of Table I except the tape tokens: rule cards, cloaks, markers,
    anthems, and the shared infrastructure both players rely on."""
    cards = [_program_card(builder, rule, start_state) for rule in program]
    for card in cards:
        cloak = builder.new(
            name="Cloak of Invisibility",
            controller=ALICE,
            phased_out=card.phased_out,
            behaviors=(Behavior(kind=BehaviorKind.CLOAK_OF_INVISIBILITY),),
        )
        builder.attach(cloak, card)

    def reanimator(controller: str, trigger: str, color: Color, result: str) -> Permanent:
        types = {"Zombie", "Cleric"}
        if controller == ALICE:
            types.add("Assembly-Worker")
        return builder.new(
            name="Rotlung Reanimator",
            controller=controller,
            base_power=2,
            base_toughness=2,
            colors=INFRASTRUCTURE_COLORS,
            creature_types=frozenset(types),
            is_creature=True,
            plus_counters=INFRA_STARTING_COUNTERS,
            behaviors=(
                Behavior(
                    kind=BehaviorKind.ROTLUNG_TRIGGER,
                    trigger_type=trigger,
                    result_color=color,
                    result_type=result,
                ),
            ),
        )

    # End-of-tape machinery: Bob's markers recreate themselves one cell
    # further out; Alice's black Cephalids die on arrival and replay the
    # death of a blank cell. None of these four have phasing.
    reanimator(BOB, "Lhurgoyf", Color.GREEN, "Lhurgoyf")
    reanimator(ALICE, "Lhurgoyf", Color.BLACK, "Cephalid")
    reanimator(BOB, "Rat", Color.WHITE, "Rat")
    reanimator(ALICE, "Rat", Color.BLACK, "Cephalid")

    for marker_type in ("Lhurgoyf", "Rat"):
        builder.new(
            name="Shared Triumph",
            controller=ALICE,
            behaviors=(Behavior(kind=BehaviorKind.SHARED_TRIUMPH, chosen_type=marker_type),),
        )
    for _ in range(2):
        builder.new(
            name="Dread of Night",
            controller=ALICE,
            behaviors=(Behavior(kind=BehaviorKind.DREAD_OF_NIGHT, chosen_color=Color.BLACK),),
        )

    builder.new(
        name="Wheel of Sun and Moon",
        controller=ALICE,
        behaviors=(Behavior(kind=BehaviorKind.WHEEL_OF_SUN_AND_MOON),),
    )
    builder.new(
        name="Steely Resolve",
        controller=ALICE,
        behaviors=(Behavior(kind=BehaviorKind.STEELY_RESOLVE, chosen_type="Assembly-Worker"),),
    )
    builder.new(
        name="Fungus Sliver",
        controller=ALICE,
        base_power=2,
        base_toughness=2,
        colors=INFRASTRUCTURE_COLORS,
        creature_types=frozenset(("Fungus", "Sliver", "Assembly-Worker")),
        is_creature=True,
        plus_counters=INFRA_STARTING_COUNTERS,
        behaviors=(Behavior(kind=BehaviorKind.FUNGUS_SLIVER_GRANT, chosen_type="Incarnation"),),
    )
    builder.new(
        name="Wild Evocation",
        controller=BOB,
        behaviors=(Behavior(kind=BehaviorKind.WILD_EVOCATION),),
    )
    builder.new(
        name="Recycle",
        controller=BOB,
        behaviors=(Behavior(kind=BehaviorKind.RECYCLE),),
    )
    builder.new(
        name="Privileged Position",
        controller=BOB,
        behaviors=(Behavior(kind=BehaviorKind.PRIVILEGED_POSITION),),
    )
    for controller in (ALICE, BOB):
        types = {"Incarnation"}
        if controller == ALICE:
            types.add("Assembly-Worker")
        builder.new(
            name="Vigor",
            controller=controller,
            base_power=6,
            base_toughness=6,
            colors=INFRASTRUCTURE_COLORS,
            creature_types=frozenset(types),
            is_creature=True,
            behaviors=(Behavior(kind=BehaviorKind.VIGOR),),
        )
    builder.new(
        name="Mesmeric Orb",
        controller=ALICE,
        behaviors=(Behavior(kind=BehaviorKind.MESMERIC_ORB),),
    )
    builder.new(
        name="Ancient Tomb",
        controller=ALICE,
        is_land=True,
        tapped=True,
    )
    builder.new(
        name="Prismatic Omen",
        controller=ALICE,
        behaviors=(Behavior(kind=BehaviorKind.PRISMATIC_OMEN),),
    )
    builder.new(
        name="Choke",
        controller=ALICE,
        behaviors=(Behavior(kind=BehaviorKind.CHOKE),),
    )
    for controller in (ALICE, BOB):
        types = {"Archon"}
        if controller == ALICE:
            types.add("Assembly-Worker")
        builder.new(
            name="Blazing Archon",
            controller=controller,
            base_power=5,
            base_toughness=6,
            colors=INFRASTRUCTURE_COLORS,
            creature_types=frozenset(types),
            is_creature=True,
            behaviors=(Behavior(kind=BehaviorKind.BLAZING_ARCHON),),
        )
    return cards


def _tape_token(
    builder: _Builder,
    creature_type: str,
    color: Color,
    counters: int,
    controller: str,
) -> Permanent:
    return builder.new(
        name=creature_type,
        controller=controller,
        base_power=2,
        base_toughness=2,
        colors=frozenset((color,)),
        creature_types=frozenset((creature_type,)),
        is_creature=True,
        is_token=True,
        plus_counters=counters,
        behaviors=(Behavior(kind=BehaviorKind.TAPE_TOKEN),),
    )


def encode_tape_tokens(
    builder: _Builder,
    tape: TmTape,
    head_color: Color,
    head_controller: str,
) -> list[Permanent]:
    """Tape tokens plus both end markers, outermost-left to outermost-right.

    Returns ``[left..., head, right..., lhurgoyf, rat]``. The Rat is created
    last and carries Illusory Gains on a fresh board.
    """
    tokens: list[Permanent] = []
    for i in range(len(tape.left) - 1, -1, -1):
        tokens.append(
            _tape_token(builder, tape.left[i].creature_type, Color.GREEN, i + 1, BOB)
        )
    tokens.append(_tape_token(builder, tape.head.creature_type, head_color, 0, head_controller))
    for i, sym in enumerate(tape.right):
        tokens.append(_tape_token(builder, sym.creature_type, Color.WHITE, i + 1, BOB))

    # Shared Triumph contributes the final +1/+1, so base 2/2 plus n counters
    # puts a marker at effective n+3: one beyond a side with n cells.
    for side, color, count in (
        ("left", Color.GREEN, len(tape.left)),
        ("right", Color.WHITE, len(tape.right)),
    ):
        marker_type = MARKER_TYPES[side]
        tokens.append(
            builder.new(
                name=marker_type,
                controller=BOB,
                base_power=2,
                base_toughness=2,
                colors=frozenset((color,)),
                creature_types=frozenset((marker_type,)),
                is_creature=True,
                is_token=True,
                plus_counters=count,
                behaviors=(Behavior(kind=BehaviorKind.END_MARKER, marker=marker_type),),
            )
        )
    return tokens


def build_initial_state(recipe: BoardRecipe) -> GameState:
    """Assemble the full starting battlefield for a recipe."""
    builder = _Builder()
    tape = tape_normalize(recipe.tape)
    instantiate_program_cards(builder, recipe.program, recipe.start_state)
    tokens = encode_tape_tokens(
        builder, tape, recipe.head_token_color, recipe.head_token_controller
    )

    gains = builder.new(
        name="Illusory Gains",
        controller=ALICE,
        behaviors=(Behavior(kind=BehaviorKind.ILLUSORY_GAINS),),
    )
    rat = tokens[-1]
    builder.attach(gains, rat)
    rat.controller = ALICE

    return builder.state
