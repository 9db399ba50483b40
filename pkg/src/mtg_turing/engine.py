"""Executes the forced game line: turn structure, triggers, and win detection.

The engine never chooses anything. Wild Evocation forces every cast, Choke
pins the only land, both Blazing Archons make attacking illegal, and
targeting is legal for exactly one creature whenever a targeted spell is
cast. Any point where zero or several legal options exist raises
ForcedMoveViolation instead of picking one.

Trigger handling follows stack rules: simultaneous triggers are stacked
with the active player's first (so they resolve last), same-controller
batches are ordered by source timestamp, and the stack resolves last-in
first-out with state-based actions settled between resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .machine import TmState
from .model import (
    ALICE,
    ALL_COLORS,
    BOB,
    Behavior,
    BehaviorKind,
    Color,
    GameState,
    Outcome,
    Permanent,
    UntilEotEffect,
    color_letters,
    colors_controlled,
    anthem_tables,
    legal_targets,
    opponent,
)
from .trace import EventKind, NullSink, TraceEvent

HAND_CARD = "Infest"
MARKER_TOKEN_TYPES = ("Lhurgoyf", "Rat")

_ANTHEM_KINDS = (BehaviorKind.SHARED_TRIUMPH, BehaviorKind.DREAD_OF_NIGHT)

# Behaviors carried only by permanents that are on the battlefield for the
# whole game; safe to index once at engine construction.
_STATIC_KINDS = frozenset(
    (
        BehaviorKind.WILD_EVOCATION,
        BehaviorKind.MESMERIC_ORB,
        BehaviorKind.CHOKE,
        BehaviorKind.PRISMATIC_OMEN,
        BehaviorKind.ILLUSORY_GAINS,
        BehaviorKind.WHEEL_OF_SUN_AND_MOON,
        BehaviorKind.VIGOR,
        BehaviorKind.FUNGUS_SLIVER_GRANT,
    )
)


class EngineError(RuntimeError):
    """The battlefield no longer implements the construction."""


class ForcedMoveViolation(EngineError):
    """A decision point offered zero or more than one legal option."""


@dataclass(slots=True)
class _Trigger:
    kind: str
    controller: str
    source_id: int
    source_timestamp: int
    seq: int
    data: dict


@dataclass(slots=True)
class _StackItem:
    trigger: _Trigger | None = None
    card: str | None = None
    caster: str | None = None
    target_id: int | None = None


@dataclass(frozen=True, slots=True)
class StepReport:
    """Outcome of one computational step (one 3- or 4-turn cycle per player)."""

    alice_turns: int
    state_changed: bool
    halted: bool


class GameEngine:
    """Drives one game to its forced conclusion, emitting trace events.

    ``same_controller_order`` optionally reorders same-controller trigger
    batches after the canonical timestamp sort; the construction's outcome
    must not depend on it (property-tested).
    """

    def __init__(self, state: GameState, sink=None, same_controller_order=None) -> None:
        self.state = state
        self.sink = sink if sink is not None else NullSink()
        self._queued: list[_Trigger] = []
        self._stack: list[_StackItem] = []
        self._dirty: set[int] = set()
        self._seq = 0
        self._order_hook = same_controller_order
        self._anthem_cache = None
        self._anthem_delta: dict[int, int] = {}
        # Rule cards, marker reanimators, and the enchantment/artifact
        # infrastructure never enter or leave play, so indexes built once
        # stay valid for the whole game.
        self._trigger_sources: dict[str, list[tuple[int, Behavior]]] = {}
        self._rules_by_state: dict[TmState, list[int]] = {TmState.Q1: [], TmState.Q2: []}
        self._static: dict[BehaviorKind, list[Permanent]] = {}
        for p in self.state.battlefield():
            for b in p.behaviors:
                if b.kind in (BehaviorKind.ROTLUNG_TRIGGER, BehaviorKind.XATHRID_TRIGGER):
                    self._trigger_sources.setdefault(b.trigger_type, []).append((p.id, b))
                    if b.rule_state is not None:
                        self._rules_by_state[b.rule_state].append(p.id)
                elif b.kind in _STATIC_KINDS:
                    self._static.setdefault(b.kind, []).append(p)

    def _find_static(self, kind: BehaviorKind, controller: str | None = None) -> Permanent | None:
        permanents = self.state.permanents
        for p in self._static.get(kind, ()):
            if p.id not in permanents or p.phased_out:
                continue
            if controller is None or p.controller == controller:
                return p
        return None

    # --- plumbing ---------------------------------------------------------

    def _emit(self, kind: EventKind, payload: dict) -> None:
        self.sink.emit(TraceEvent(self.state.turn_number, self.state.phase, kind, payload))

    def _anthems(self):
        if self._anthem_cache is None:
            self._anthem_cache = anthem_tables(self.state)
        return self._anthem_cache

    def _battlefield_changed(self, perm: Permanent) -> None:
        if any(b.kind in _ANTHEM_KINDS for b in perm.behaviors):
            self._anthem_cache = None
            self._anthem_delta.clear()

    def _eff_toughness(self, p: Permanent) -> int:
        """Effective toughness on the engine's hot path.

        The anthem contribution depends only on a permanent's types and
        colors, both immutable, and on the anthem set, which is fixed for a
        game; it is cached per permanent id.
        """
        delta = self._anthem_delta.get(p.id)
        if delta is None:
            tables = self._anthems()
            delta = 0
            for t in p.creature_types:
                delta += tables.triumph_by_type.get(t, 0)
            for c in p.colors:
                delta -= tables.dread_by_color.get(c, 0)
            self._anthem_delta[p.id] = delta
        toughness = p.base_toughness + p.plus_counters - p.minus_counters + delta
        if self.state.until_eot:
            pid = p.id
            for eff in self.state.until_eot:
                if pid in eff.affected:
                    toughness += eff.toughness_delta
        return toughness

    def _queue(self, kind: str, controller: str, source: Permanent, data: dict) -> None:
        self._seq += 1
        self._queued.append(
            _Trigger(kind, controller, source.id, source.timestamp, self._seq, data)
        )
        payload = {"trigger": kind, "source": source.id, "name": source.name, "controller": controller}
        if "dead_id" in data:
            payload["dead"] = data["dead_id"]
        self._emit(EventKind.TRIGGER_FIRED, payload)

    def q1_set_active(self) -> bool:
        """True if the Q1 rule cards are the phased-in set. Raises if mixed."""
        st = self.state
        q1_in = [not st.permanents[i].phased_out for i in self._rules_by_state[TmState.Q1]]
        q2_in = [not st.permanents[i].phased_out for i in self._rules_by_state[TmState.Q2]]
        if all(q1_in) and not any(q2_in):
            return True
        if all(q2_in) and not any(q1_in):
            return False
        raise EngineError("ambiguous phase partition among rule cards")

    # --- turn structure ----------------------------------------------------

    def advance_turn(self) -> None:
        """Run one full turn for the active player, then pass the turn."""
        st = self.state
        if st.outcome is not Outcome.ONGOING:
            raise EngineError("game is over")
        st.turn_number += 1
        player = st.active_player

        st.phase = "untap"
        self._phasing_toggle(player)
        self._untap_step(player)

        st.phase = "upkeep"
        self._queue_wild_evocation(player)
        self._resolve_all()
        if st.outcome is not Outcome.ONGOING:
            return

        st.phase = "draw"
        if player == ALICE:
            self._draw(player)
        # Bob skips his draw step (Recycle), which keeps his empty library safe.

        st.phase = "end"
        self._cleanup()
        st.active_player = opponent(player)

    def _phasing_toggle(self, player: str) -> None:
        st = self.state
        toggled = 0
        for p in list(st.battlefield()):
            if p.has_phasing and p.controller == player:
                p.phased_out = not p.phased_out
                toggled += 1
                if not p.phased_out:
                    self._dirty.add(p.id)
                # Attached auras phase in and out with their host.
                for aid in sorted(p.attachments):
                    aura = st.permanents.get(aid)
                    if aura is not None:
                        aura.phased_out = p.phased_out
        if toggled:
            self._emit(
                EventKind.PHASE_TOGGLE,
                {"player": player, "toggled": toggled, "q1_active": self.q1_set_active()},
            )

    def _island_locked(self, land: Permanent) -> bool:
        # Choke stops Islands from untapping; Prismatic Omen makes its
        # controller's lands every basic land type, Island included.
        return (
            self._find_static(BehaviorKind.CHOKE) is not None
            and self._find_static(BehaviorKind.PRISMATIC_OMEN, land.controller) is not None
        )

    def _untap_step(self, player: str) -> None:
        st = self.state
        orb = self._find_static(BehaviorKind.MESMERIC_ORB)
        for p in list(st.battlefield()):
            if p.controller != player or p.phased_out or not p.tapped:
                continue
            if p.is_land and self._island_locked(p):
                continue
            p.tapped = False
            self._emit(EventKind.UNTAP, {"id": p.id, "name": p.name})
            if orb is not None:
                # The mill hits the untapped permanent's controller; the
                # trigger itself belongs to the Orb's controller for stacking.
                self._queue("mesmeric_orb", orb.controller, orb, {"mill_player": p.controller})

    def _queue_wild_evocation(self, player: str) -> None:
        evocation = self._find_static(BehaviorKind.WILD_EVOCATION)
        if evocation is not None and self.state.players[player].hand:
            self._queue("wild_evocation", evocation.controller, evocation, {"player": player})

    def _draw(self, player: str) -> None:
        zone = self.state.players[player]
        if not zone.library:
            raise EngineError(f"{player} would draw from an empty library")
        card = zone.library.pop(0)
        zone.hand.append(card)
        self._emit(EventKind.DRAW, {"player": player, "card": card})

    def _cleanup(self) -> None:
        st = self.state
        if st.until_eot:
            for eff in st.until_eot:
                self._dirty.update(eff.affected)
            st.until_eot.clear()
        for p in st.battlefield():
            if p.marked_damage:
                p.marked_damage = 0
                self._dirty.add(p.id)
        self._resolve_all()

    # --- the stack ----------------------------------------------------------

    def _resolve_all(self) -> None:
        st = self.state
        while True:
            self._run_sba()
            if self._queued:
                self._stack_queued()
            if not self._stack:
                break
            item = self._stack.pop()
            self._resolve_item(item)
            if st.outcome is not Outcome.ONGOING:
                self._stack.clear()
                self._queued.clear()
                break

    def _stack_queued(self) -> None:
        batch = self._queued
        self._queued = []
        active = self.state.active_player
        # APNAP: the active player's triggers are stacked first and therefore
        # resolve last.
        for group_of in (active, opponent(active)):
            group = [t for t in batch if t.controller == group_of]
            group.sort(key=lambda t: (t.source_timestamp, t.seq))
            if self._order_hook is not None and len(group) > 1:
                group = self._order_hook(group)
            for trig in group:
                self._stack.append(_StackItem(trigger=trig))

    def _resolve_item(self, item: _StackItem) -> None:
        if item.trigger is None:
            self._resolve_spell(item.card, item.caster, item.target_id)
            return
        trig = item.trigger
        if trig.kind == "wild_evocation":
            self._forced_cast(trig.data["player"])
        elif trig.kind == "mesmeric_orb":
            self.mill_to_bottom(trig.data["mill_player"])
        elif trig.kind == "token_maker":
            self._create_rule_token(trig)
        elif trig.kind == "illusory_gains":
            self._attach_gains(trig.data["token_id"])
        elif trig.kind == "fungus_counter":
            self._fungus_counter(trig.data["creature_id"])
        elif trig.kind == "soul_snuffers_etb":
            self._soul_snuffers_etb()
        else:
            raise EngineError(f"unknown trigger kind {trig.kind!r}")

    # --- forced casting ------------------------------------------------------

    def _forced_cast(self, player: str) -> None:
        st = self.state
        hand = st.players[player].hand
        if not hand:
            return
        card = hand[0]
        payload: dict = {"player": player, "card": card, "hand_size": len(hand)}
        target_id: int | None = None
        target_count: int | None = None
        if card == "Cleansing Beam":
            targets = legal_targets(card, player, st)
            target_count = len(targets)
            payload["legal_targets"] = target_count
            payload["target"] = targets[0] if len(targets) == 1 else None
        self._emit(EventKind.FORCED_CAST, payload)
        if len(hand) != 1:
            raise ForcedMoveViolation(f"{player} holds {len(hand)} cards; forced cast is ambiguous")
        if target_count is not None:
            if target_count != 1:
                raise ForcedMoveViolation(f"{card} has {target_count} legal targets, needs exactly 1")
            target_id = payload["target"]
        hand.pop(0)
        self._stack.append(_StackItem(card=card, caster=player, target_id=target_id))

    def _card_to_library_bottom(self, player: str, card: str) -> None:
        if self._find_static(BehaviorKind.WHEEL_OF_SUN_AND_MOON, player) is None:
            raise EngineError(f"{card} would leave the loop: {player} has no graveyard replacement")
        self.state.players[player].library.append(card)

    def mill_to_bottom(self, player: str) -> None:
        """Mesmeric Orb mill, rerouted to the library bottom by the Wheel."""
        zone = self.state.players[player]
        if not zone.library:
            self._emit(EventKind.MILLED_TO_BOTTOM, {"player": player, "card": None, "note": "empty-library"})
            return
        card = zone.library.pop(0)
        self._card_to_library_bottom(player, card)
        self._emit(EventKind.MILLED_TO_BOTTOM, {"player": player, "card": card})

    # --- spells ---------------------------------------------------------------

    def _resolve_spell(self, card: str, caster: str, target_id: int | None) -> None:
        st = self.state
        if card == "Infest":
            # Only creatures on the battlefield when this resolves are
            # affected; the replacement token created later this turn keeps
            # its printed 2/2 and survives.
            affected = frozenset(p.id for p in st.visible() if p.is_creature)
            st.until_eot.append(UntilEotEffect(-2, -2, affected))
            self._dirty.update(affected)
        elif card == "Cleansing Beam":
            target = st.permanents.get(target_id)
            if target is None or target.phased_out:
                raise EngineError("Cleansing Beam target left the battlefield")
            affected = [target]
            for p in st.visible():
                if p.is_creature and p.id != target.id and (p.colors & target.colors):
                    affected.append(p)
            affected.sort(key=lambda p: p.id)
            self.deal_damage(affected, 2, source="Cleansing Beam")
        elif card == "Soul Snuffers":
            body = self._enter_battlefield(
                Permanent(
                    id=st.new_id(),
                    name="Soul Snuffers",
                    controller=caster,
                    natural_controller=caster,
                    base_power=3,
                    base_toughness=3,
                    colors=frozenset((Color.BLACK,)),
                    creature_types=frozenset(("Efreet",)),
                    is_creature=True,
                    behaviors=(Behavior(kind=BehaviorKind.SOUL_SNUFFERS_ETB),),
                )
            )
            self._queue("soul_snuffers_etb", caster, body, {})
            return  # the card stays on the battlefield until its body dies
        elif card == "Coalition Victory":
            self._coalition_victory(caster)
            if st.outcome is not Outcome.ONGOING:
                return
        else:
            raise EngineError(f"unknown card {card!r}")
        self._card_to_library_bottom(caster, card)

    def _coalition_victory(self, caster: str) -> None:
        st = self.state
        has_land = any(p.is_land and p.controller == caster for p in st.visible())
        has_omen = any(
            p.has(BehaviorKind.PRISMATIC_OMEN) and p.controller == caster for p in st.visible()
        )
        colors = colors_controlled(caster, st)
        if has_land and has_omen and colors == ALL_COLORS:
            st.outcome = Outcome.ALICE_WINS
            self._emit(
                EventKind.WIN,
                {"player": caster, "via": "Coalition Victory", "colors": color_letters(colors)},
            )

    def deal_damage(self, creatures: list[Permanent], amount: int, source: str) -> None:
        """Deal ``amount`` damage to each creature, applying Vigor replacement
        and the Fungus Sliver counter grant per damage event."""
        if amount <= 0:
            return
        st = self.state
        vigors: dict[str, Permanent] = {}
        permanents = st.permanents
        for p in self._static.get(BehaviorKind.VIGOR, ()):
            if p.id in permanents and not p.phased_out:
                vigors[p.controller] = p
        grant_source = self._find_static(BehaviorKind.FUNGUS_SLIVER_GRANT)
        grant = None
        if grant_source is not None:
            grant = grant_source.behavior(BehaviorKind.FUNGUS_SLIVER_GRANT).chosen_type
        prevented: list[int] = []
        damaged: list[int] = []
        for p in creatures:
            vigor = vigors.get(p.controller)
            if vigor is not None and vigor.id != p.id:
                p.plus_counters += amount
                prevented.append(p.id)
            else:
                p.marked_damage += amount
                damaged.append(p.id)
                if grant is not None and grant in p.creature_types:
                    self._queue("fungus_counter", p.controller, p, {"creature_id": p.id})
            self._dirty.add(p.id)
        if prevented:
            self._emit(
                EventKind.DAMAGE_PREVENTED,
                {"source": source, "amount": amount, "ids": prevented, "counters_each": amount},
            )
        if damaged:
            self._emit(
                EventKind.COUNTER_ADDED,
                {"source": source, "note": "damage-marked", "ids": damaged, "amount": amount},
            )

    def _fungus_counter(self, creature_id: int) -> None:
        p = self.state.permanents.get(creature_id)
        if p is None or p.phased_out:
            return
        p.plus_counters += 1
        self._dirty.add(p.id)
        self._emit(EventKind.COUNTER_ADDED, {"source": "Fungus Sliver", "delta": "+1/+1", "ids": [p.id]})

    def _soul_snuffers_etb(self) -> None:
        st = self.state
        ids = []
        for p in st.visible():
            if p.is_creature:
                p.minus_counters += 1
                ids.append(p.id)
                self._dirty.add(p.id)
        self._emit(EventKind.COUNTER_ADDED, {"source": "Soul Snuffers", "delta": "-1/-1", "ids": ids})

    # --- tokens and control ----------------------------------------------------

    def _enter_battlefield(self, perm: Permanent) -> Permanent:
        perm.timestamp = perm.id
        self.state.permanents[perm.id] = perm
        self._dirty.add(perm.id)
        self._battlefield_changed(perm)
        return perm

    def _create_rule_token(self, trig: _Trigger) -> None:
        st = self.state
        b: Behavior = trig.data["behavior"]
        ctype = b.result_type
        if b.is_halt:
            tags: tuple[Behavior, ...] = ()
        elif ctype in MARKER_TOKEN_TYPES:
            tags = (Behavior(kind=BehaviorKind.END_MARKER, marker=ctype),)
        elif b.result_color is Color.BLACK:
            tags = ()  # the relay Cephalid; it dies before anything reads it
        else:
            tags = (Behavior(kind=BehaviorKind.TAPE_TOKEN),)
        token = self._enter_battlefield(
            Permanent(
                id=st.new_id(),
                name=ctype,
                controller=trig.controller,
                natural_controller=trig.controller,
                base_power=2,
                base_toughness=2,
                colors=frozenset((b.result_color,)),
                creature_types=frozenset((ctype,)),
                is_creature=True,
                is_token=True,
                tapped=b.result_tapped,
                behaviors=tags,
            )
        )
        self._emit(
            EventKind.TOKEN_CREATED,
            {
                "id": token.id,
                "name": ctype,
                "colors": color_letters(token.colors),
                "tapped": token.tapped,
                "controller": token.controller,
                "halt_signal": b.is_halt,
            },
        )
        gains = self._find_static(BehaviorKind.ILLUSORY_GAINS)
        if gains is not None and token.controller == opponent(gains.controller):
            self._queue("illusory_gains", gains.controller, gains, {"token_id": token.id})

    def _attach_gains(self, token_id: int) -> None:
        st = self.state
        gains = self._find_static(BehaviorKind.ILLUSORY_GAINS)
        if gains is None:
            return
        token = st.permanents.get(token_id)
        if token is None or token.phased_out or gains.attached_to == token_id:
            return
        if gains.attached_to is not None:
            old = st.permanents.get(gains.attached_to)
            if old is not None:
                old.attachments.discard(gains.id)
                if old.controller != old.natural_controller:
                    old.controller = old.natural_controller
                    self._emit(
                        EventKind.CONTROL_CHANGED,
                        {"id": old.id, "name": old.name, "to": old.controller, "reverted": True},
                    )
        gains.attached_to = token.id
        token.attachments.add(gains.id)
        if token.controller != gains.controller:
            token.controller = gains.controller
            self._emit(
                EventKind.CONTROL_CHANGED,
                {"id": token.id, "name": token.name, "to": gains.controller, "reverted": False},
            )

    # --- state-based actions -----------------------------------------------------

    def _run_sba(self) -> None:
        st = self.state
        while self._dirty:
            ids = sorted(self._dirty)
            self._dirty.clear()
            dying: list[Permanent] = []
            for pid in ids:
                p = st.permanents.get(pid)
                if p is None or p.phased_out or not p.is_creature:
                    continue
                toughness = self._eff_toughness(p)
                if toughness <= 0 or (p.marked_damage and p.marked_damage >= toughness):
                    dying.append(p)
                else:
                    n = min(p.plus_counters, p.minus_counters)
                    if n:
                        p.plus_counters -= n
                        p.minus_counters -= n
            if dying:
                self._destroy(dying)

    def _destroy(self, dying: list[Permanent]) -> None:
        st = self.state
        dying = sorted(dying, key=lambda p: p.id)
        snapshots = []
        for p in dying:
            snapshots.append((p.id, p.controller, p.creature_types))
            self._emit(
                EventKind.DEATH,
                {
                    "id": p.id,
                    "name": p.name,
                    "controller": p.controller,
                    "token": p.is_token,
                    "tags": [b.kind.value for b in p.behaviors],
                },
            )
        for p in dying:
            if p.attachments:
                attached = [st.permanents[a] for a in sorted(p.attachments) if a in st.permanents]
                names = ", ".join(a.name for a in attached)
                raise EngineError(f"{p.name} died with auras attached ({names}); board is corrupt")
            if p.attached_to is not None:
                host = st.permanents.get(p.attached_to)
                if host is not None:
                    host.attachments.discard(p.id)
            del st.permanents[p.id]
            self._battlefield_changed(p)
            if not p.is_token:
                if p.name == "Soul Snuffers":
                    # The Wheel reroutes the card to the library bottom, which
                    # is what lets Alice cast it again next cycle.
                    self._card_to_library_bottom(p.controller, p.name)
                else:
                    raise EngineError(f"non-token permanent died: {p.name} (id {p.id})")
        for dead_id, controller, types in snapshots:
            self._fire_death_triggers(dead_id, controller, types)

    def _fire_death_triggers(self, dead_id: int, dead_controller: str, types: frozenset[str]) -> None:
        st = self.state
        program_matches = 0
        for ctype in sorted(types):
            for source_id, b in self._trigger_sources.get(ctype, ()):
                src = st.permanents.get(source_id)
                if src is None or src.phased_out:
                    continue
                if b.controller_restricted and dead_controller != src.controller:
                    continue
                if b.rule_state is not None:
                    program_matches += 1
                self._queue(
                    "token_maker",
                    src.controller,
                    src,
                    {"behavior": b, "dead_id": dead_id, "dead_type": ctype},
                )
        if program_matches > 1:
            raise EngineError(f"death of {dead_id} matched {program_matches} program rules")

    # --- computational steps ---------------------------------------------------

    def at_step_boundary(self) -> bool:
        st = self.state
        return (
            st.outcome is Outcome.ONGOING
            and st.active_player == ALICE
            and st.players[ALICE].hand == [HAND_CARD]
        )

    def run_computational_step(self) -> StepReport:
        """Advance turns until the next step boundary or the win.

        A non-state-change step is four turns for each player, a state-change
        step is three; the cycle length is emergent from the library flow, not
        chosen here.
        """
        st = self.state
        if not self.at_step_boundary():
            raise EngineError("not at a step boundary")
        q1_before = self.q1_set_active()
        alice_turns = 0
        for _ in range(12):
            self.advance_turn()  # Alice
            alice_turns += 1
            if st.outcome is not Outcome.ONGOING:
                break
            self.advance_turn()  # Bob
            if st.players[ALICE].hand == [HAND_CARD]:
                break
        else:
            raise EngineError("no step boundary reached within 12 turns")
        halted = st.outcome is Outcome.ALICE_WINS
        q1_after = q1_before if halted else self.q1_set_active()
        report = StepReport(
            alice_turns=alice_turns,
            state_changed=(q1_after != q1_before),
            halted=halted,
        )
        self._emit(
            EventKind.STEP_BOUNDARY,
            {"alice_turns": alice_turns, "halted": halted, "q1_active": q1_after},
        )
        return report
