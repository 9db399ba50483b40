"""Battlefield object model and the static power/toughness algebra.

The construction never sets stats, switches power and toughness, or creates
layer-order dependencies, so effective stats collapse to a flat sum:
base + counters + anthem effects + until-end-of-turn deltas. Card behaviors
are data tags on permanents; the engine dispatches on tags, never on card
names scattered through the rules code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from .machine import TmState


class Color(Enum):
    WHITE = "W"
    BLUE = "U"
    BLACK = "B"
    RED = "R"
    GREEN = "G"


WUBRG = (Color.WHITE, Color.BLUE, Color.BLACK, Color.RED, Color.GREEN)
ALL_COLORS = frozenset(WUBRG)
# Every non-token creature in the construction has been painted white, black,
# red and green; blue is reserved for the halt signal.
INFRASTRUCTURE_COLORS = frozenset((Color.WHITE, Color.BLACK, Color.RED, Color.GREEN))

ALICE = "alice"
BOB = "bob"
PLAYERS = (ALICE, BOB)


def opponent(player: str) -> str:
    return BOB if player == ALICE else ALICE


def color_letters(colors: frozenset[Color]) -> str:
    return "".join(c.value for c in WUBRG if c in colors)


class BehaviorKind(Enum):
    ROTLUNG_TRIGGER = "RotlungTrigger"
    XATHRID_TRIGGER = "XathridTrigger"
    ILLUSORY_GAINS = "IllusoryGains"
    CLOAK_OF_INVISIBILITY = "CloakOfInvisibility"
    WHEEL_OF_SUN_AND_MOON = "WheelOfSunAndMoon"
    STEELY_RESOLVE = "SteelyResolve"
    DREAD_OF_NIGHT = "DreadOfNight"
    FUNGUS_SLIVER_GRANT = "FungusSliverGrant"
    SHARED_TRIUMPH = "SharedTriumph"
    WILD_EVOCATION = "WildEvocation"
    RECYCLE = "Recycle"
    PRIVILEGED_POSITION = "PrivilegedPosition"
    VIGOR = "Vigor"
    MESMERIC_ORB = "MesmericOrb"
    PRISMATIC_OMEN = "PrismaticOmen"
    CHOKE = "Choke"
    BLAZING_ARCHON = "BlazingArchon"
    SOUL_SNUFFERS_ETB = "SoulSnuffersETB"
    TAPE_TOKEN = "TapeToken"
    END_MARKER = "EndMarker"


@dataclass(frozen=True, slots=True)
class Behavior:
    """One modeled card behavior; trigger parameters are baked in at build time."""

    kind: BehaviorKind
    trigger_type: str | None = None
    result_color: Color | None = None
    result_type: str | None = None
    result_tapped: bool = False
    is_halt: bool = False
    controller_restricted: bool = False
    rule_state: TmState | None = None
    chosen_type: str | None = None
    chosen_color: Color | None = None
    marker: str | None = None


@dataclass(slots=True)
class Permanent:
    id: int
    name: str
    controller: str
    natural_controller: str
    base_power: int = 0
    base_toughness: int = 0
    colors: frozenset[Color] = frozenset()
    creature_types: frozenset[str] = frozenset()
    is_creature: bool = False
    is_land: bool = False
    is_token: bool = False
    tapped: bool = False
    phased_out: bool = False
    has_phasing: bool = False
    plus_counters: int = 0
    minus_counters: int = 0
    marked_damage: int = 0
    attached_to: int | None = None
    attachments: set[int] = field(default_factory=set)
    behaviors: tuple[Behavior, ...] = ()
    timestamp: int = 0

    def has(self, kind: BehaviorKind) -> bool:
        return any(b.kind is kind for b in self.behaviors)

    def behavior(self, kind: BehaviorKind) -> Behavior | None:
        for b in self.behaviors:
            if b.kind is kind:
                return b
        return None


class Outcome(Enum):
    ONGOING = "ongoing"
    ALICE_WINS = "alice-wins"
    STEP_LIMIT = "step-limit"


@dataclass(slots=True)
class PlayerZone:
    player: str
    hand: list[str] = field(default_factory=list)
    library: list[str] = field(default_factory=list)  # top first


@dataclass(frozen=True, slots=True)
class UntilEotEffect:
    power_delta: int
    toughness_delta: int
    affected: frozenset[int]


@dataclass(slots=True)
class GameState:
    permanents: dict[int, Permanent] = field(default_factory=dict)
    players: dict[str, PlayerZone] = field(
        default_factory=lambda: {p: PlayerZone(p) for p in PLAYERS}
    )
    active_player: str = ALICE
    turn_number: int = 0
    phase: str = "start"
    until_eot: list[UntilEotEffect] = field(default_factory=list)
    outcome: Outcome = Outcome.ONGOING
    next_id: int = 1

    def new_id(self) -> int:
        n = self.next_id
        self.next_id += 1
        return n

    def battlefield(self) -> Iterable[Permanent]:
        """All permanents in id order, phased-out included."""
        return self.permanents.values()

    def visible(self) -> Iterable[Permanent]:
        """Permanents that exist for queries: phased out means invisible."""
        return (p for p in self.permanents.values() if not p.phased_out)

    def creatures(self, controller: str | None = None) -> Iterable[Permanent]:
        for p in self.visible():
            if p.is_creature and (controller is None or p.controller == controller):
                yield p

    def find_behavior(self, kind: BehaviorKind, controller: str | None = None) -> Permanent | None:
        for p in self.visible():
            if (controller is None or p.controller == controller) and p.has(kind):
                return p
        return None


@dataclass(frozen=True)
class AnthemTables:
    """Battlefield-wide static stat modifiers, aggregated once per query pass."""

    triumph_by_type: dict[str, int]
    dread_by_color: dict[Color, int]


def anthem_tables(state: GameState) -> AnthemTables:
    triumph: dict[str, int] = {}
    dread: dict[Color, int] = {}
    for p in state.visible():
        for b in p.behaviors:
            if b.kind is BehaviorKind.SHARED_TRIUMPH and b.chosen_type:
                triumph[b.chosen_type] = triumph.get(b.chosen_type, 0) + 1
            elif b.kind is BehaviorKind.DREAD_OF_NIGHT and b.chosen_color:
                dread[b.chosen_color] = dread.get(b.chosen_color, 0) + 1
    return AnthemTables(triumph, dread)


def effective_stats(
    p: Permanent, state: GameState, tables: AnthemTables | None = None
) -> tuple[int, int]:
    """Effective (power, toughness) under counters, anthems, and EOT deltas."""
    if p.phased_out:
        raise ValueError(f"permanent {p.id} ({p.name}) is phased out")
    if tables is None:
        tables = anthem_tables(state)
    delta = p.plus_counters - p.minus_counters
    power = p.base_power + delta
    toughness = p.base_toughness + delta
    if tables.triumph_by_type:
        for t in p.creature_types:
            n = tables.triumph_by_type.get(t)
            if n:
                power += n
                toughness += n
    if tables.dread_by_color:
        for c in p.colors:
            n = tables.dread_by_color.get(c)
            if n:
                power -= n
                toughness -= n
    for eff in state.until_eot:
        if p.id in eff.affected:
            power += eff.power_delta
            toughness += eff.toughness_delta
    return power, toughness


def annihilate_counters(p: Permanent) -> Permanent:
    """Return a copy with min(plus, minus) removed from both counter piles."""
    n = min(p.plus_counters, p.minus_counters)
    if n == 0:
        return p
    return replace(
        p,
        plus_counters=p.plus_counters - n,
        minus_counters=p.minus_counters - n,
        attachments=set(p.attachments),
    )


def shrouded_types(state: GameState) -> frozenset[str]:
    chosen = set()
    for p in state.visible():
        for b in p.behaviors:
            if b.kind is BehaviorKind.STEELY_RESOLVE and b.chosen_type:
                chosen.add(b.chosen_type)
    return frozenset(chosen)


def legal_targets(spell: str, caster: str, state: GameState) -> list[int]:
    """Creature ids ``caster`` may target with ``spell``, in id order.

    Excludes phased-out permanents, creatures whose controller has
    Privileged Position (when that controller is not the caster), and
    creatures of a Steely Resolve chosen type (shroud).
    """
    if spell != "Cleansing Beam":
        raise ValueError(f"spell has no targeting rule here: {spell!r}")
    protected_players = {
        p.controller
        for p in state.visible()
        if p.has(BehaviorKind.PRIVILEGED_POSITION) and p.controller != caster
    }
    shroud = shrouded_types(state)
    out = []
    for p in state.visible():
        if not p.is_creature:
            continue
        if p.controller in protected_players:
            continue
        if shroud & p.creature_types:
            continue
        out.append(p.id)
    return out


def colors_controlled(player: str, state: GameState) -> frozenset[Color]:
    found: set[Color] = set()
    for p in state.creatures(player):
        found |= p.colors
    return frozenset(found)


# --- Board snapshot serialization -------------------------------------------

def board_to_dict(state: GameState) -> dict:
    tables = anthem_tables(state)
    perms = []
    for p in sorted(state.permanents.values(), key=lambda q: q.id):
        entry: dict = {
            "id": p.id,
            "name": p.name,
            "controller": p.controller,
            "token": p.is_token,
        }
        if p.is_creature:
            entry["base"] = f"{p.base_power}/{p.base_toughness}"
            if not p.phased_out:
                pw, tn = effective_stats(p, state, tables)
                entry["effective"] = f"{pw}/{tn}"
            entry["types"] = sorted(p.creature_types)
        if p.is_land:
            entry["land"] = True
        entry["colors"] = color_letters(p.colors)
        if p.plus_counters:
            entry["plus_counters"] = p.plus_counters
        if p.minus_counters:
            entry["minus_counters"] = p.minus_counters
        if p.marked_damage:
            entry["marked_damage"] = p.marked_damage
        if p.tapped:
            entry["tapped"] = True
        if p.phased_out:
            entry["phased_out"] = True
        if p.attached_to is not None:
            entry["attached_to"] = p.attached_to
        if p.behaviors:
            entry["tags"] = [b.kind.value for b in p.behaviors]
        perms.append(entry)
    return {
        "outcome": state.outcome.value,
        "turn": state.turn_number,
        "active_player": state.active_player,
        "players": {
            name: {"hand": list(zone.hand), "library": list(zone.library)}
            for name, zone in sorted(state.players.items())
        },
        "permanents": perms,
    }


def dump_board(state: GameState) -> str:
    """Stable text snapshot: header lines then one line per permanent by id."""
    data = board_to_dict(state)
    lines = [
        f"outcome={data['outcome']} turn={data['turn']} active={data['active_player']}",
    ]
    for name in sorted(data["players"]):
        z = data["players"][name]
        lines.append(f"{name}: hand=[{', '.join(z['hand'])}] library=[{', '.join(z['library'])}]")
    lines.append(f"permanents={len(data['permanents'])}")
    for e in data["permanents"]:
        bits = [f"[{e['id']:>3}] {e['name']}", f"ctrl={e['controller']}"]
        if e.get("token"):
            bits.append("token")
        if "base" in e:
            bits.append(f"base={e['base']}")
        if "effective" in e:
            bits.append(f"eff={e['effective']}")
        if "types" in e:
            bits.append("types=" + "+".join(e["types"]))
        if e.get("land"):
            bits.append("land")
        if e["colors"]:
            bits.append(f"colors={e['colors']}")
        if e.get("plus_counters"):
            bits.append(f"+1/+1={e['plus_counters']}")
        if e.get("minus_counters"):
            bits.append(f"-1/-1={e['minus_counters']}")
        if e.get("marked_damage"):
            bits.append(f"damage={e['marked_damage']}")
        if e.get("tapped"):
            bits.append("tapped")
        if e.get("phased_out"):
            bits.append("phased-out")
        if e.get("attached_to") is not None:
            bits.append(f"on={e['attached_to']}")
        if e.get("tags"):
            bits.append("tags=" + ",".join(e["tags"]))
        lines.append("  " + " | ".join(bits))
    return "\n".join(lines) + "\n"


def dump_board_json(state: GameState) -> str:
    return json.dumps(board_to_dict(state), indent=2, sort_keys=False) + "\n"
