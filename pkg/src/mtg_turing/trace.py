"""Deterministic trace events and output sinks.

Every engine action is reported as a TraceEvent. Serialization is one JSON
object per line with a fixed top-level key order (turn, phase, kind,
payload) and sorted payload keys, so identical runs produce byte-identical
logs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable


class EventKind(Enum):
    PHASE_TOGGLE = "PhaseToggle"
    UNTAP = "Untap"
    FORCED_CAST = "ForcedCast"
    DRAW = "Draw"
    TRIGGER_FIRED = "TriggerFired"
    TOKEN_CREATED = "TokenCreated"
    CONTROL_CHANGED = "ControlChanged"
    DEATH = "Death"
    DAMAGE_PREVENTED = "DamagePrevented"
    COUNTER_ADDED = "CounterAdded"
    MILLED_TO_BOTTOM = "MilledToBottom"
    WIN = "Win"
    STEP_BOUNDARY = "StepBoundary"


@dataclass(frozen=True, slots=True)
class TraceEvent:
    turn: int
    phase: str
    kind: EventKind
    payload: dict

    def to_json(self) -> str:
        record = {
            "turn": self.turn,
            "phase": self.phase,
            "kind": self.kind.value,
            "payload": dict(sorted(self.payload.items())),
        }
        return json.dumps(record, separators=(",", ":"), sort_keys=False)


class NullSink:
    """Discards everything."""

    def emit(self, event: TraceEvent) -> None:
        pass


class ListSink:
    """Keeps every event in memory; useful for tests and audits."""

    def __init__(self) -> None:
        self.events: list[TraceEvent] = []

    def emit(self, event: TraceEvent) -> None:
        self.events.append(event)


class DigestSink:
    """Streams serialized events into a SHA-256 digest without storing them."""

    def __init__(self) -> None:
        self._hash = hashlib.sha256()
        self.count = 0

    def emit(self, event: TraceEvent) -> None:
        self._hash.update(event.to_json().encode("utf-8"))
        self._hash.update(b"\n")
        self.count += 1

    def hexdigest(self) -> str:
        return self._hash.hexdigest()


class FileSink:
    """Writes one JSON line per event to an open text stream."""

    def __init__(self, stream: IO[str]) -> None:
        self._stream = stream

    def emit(self, event: TraceEvent) -> None:
        self._stream.write(event.to_json())
        self._stream.write("\n")


class TeeSink:
    """Fans events out to several sinks."""

    def __init__(self, sinks: Iterable) -> None:
        self._sinks = list(sinks)

    def emit(self, event: TraceEvent) -> None:
        for sink in self._sinks:
            sink.emit(event)
