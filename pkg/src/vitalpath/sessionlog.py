"""Append-only session log and its replay.

Every state-bearing event (session starts, accepted readings, audit
entries, alarm raises and verdicts) is appended as one JSON object per
line in global sequence order. Replaying a log folds the records back
into (session positions, latest vitals map, alarm states) without
re-running any automation: position-changing audit records carry their
destination, so the log is the single source of truth.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .store import UnitMismatchError, VitalReading, VitalStore
from .vitals import UnknownVitalKindError, parse_kind

LogRecord = dict[str, Any]

# record types
SESSION_START = "session_start"
READING = "reading"
AUDIT = "audit"
ALARM_RAISED = "alarm_raised"
ALARM_RESOLVED = "alarm_resolved"

_POSITION_KINDS = {"manual_advance", "auto_advance", "undo"}


class LogFormatError(ValueError):
    """A log line is not a JSON object with the required envelope."""


class SessionLog:
    """Global ordered record stream, optionally mirrored to a JSONL file.

    Appends are atomic and sequence numbers gapless; nothing is ever
    rewritten.
    """

    def __init__(self, path: str | Path | None = None):
        self._records: list[LogRecord] = []
        self._seq = 0
        self._lock = threading.Lock()
        self._file = open(path, "a", encoding="utf-8") if path is not None else None

    def append(self, record_type: str, t: int, **fields: Any) -> LogRecord:
        with self._lock:
            self._seq += 1
            record: LogRecord = {"seq": self._seq, "t": t, "type": record_type, **fields}
            self._records.append(record)
            if self._file is not None:
                self._file.write(json.dumps(record, sort_keys=True) + "\n")
                self._file.flush()
        return record

    def records(self) -> tuple[LogRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def export_session(self, session_id: str) -> list[LogRecord]:
        """The session's own records plus every global one (readings,
        alarms), in original order. Sufficient to replay that session."""
        out = []
        for record in self.records():
            owner = record.get("session_id")
            if owner is None or owner == session_id:
                out.append(record)
        return out

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None


def dump_records(records: Iterable[LogRecord]) -> str:
    return "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)


def parse_records(text: str) -> list[LogRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {lineno}: {exc}") from exc
        if not isinstance(record, dict) or "type" not in record or "seq" not in record:
            raise LogFormatError(f"line {lineno}: not a log record")
        records.append(record)
    return records


@dataclass(frozen=True)
class ReplayedState:
    """The comparison surface for log replay: where each session stands,
    what the store believes about each vital, and each alarm's fate."""

    positions: Mapping[str, tuple[str, str]]
    latest: Mapping[str, tuple[float, int, str]]
    alarm_states: Mapping[str, str]


def state_from_records(records: Iterable[LogRecord]) -> ReplayedState:
    """Fold a log back into its final state.

    Readings re-enter a fresh store, so dedup and latest-pointer rules
    apply identically. Audit records that move a session carry their
    destination and are applied verbatim (automation is not re-derived:
    the log already says what happened).
    """
    store = VitalStore()
    positions: dict[str, tuple[str, str]] = {}
    alarm_states: dict[str, str] = {}
    ordered = sorted(records, key=lambda r: r["seq"])
    for record in ordered:
        rtype = record["type"]
        if rtype == SESSION_START:
            positions[record["session_id"]] = (record["graph_id"], record["node_id"])
        elif rtype == READING:
            try:
                store.ingest_reading(
                    VitalReading(
                        kind=parse_kind(record["kind"]),
                        value=record["value"],
                        timestamp=record["timestamp"],
                        origin=record["origin"],
                    )
                )
            except (UnknownVitalKindError, UnitMismatchError):
                # The live store never logged these; a doctored log must
                # not corrupt the replayed state.
                continue
        elif rtype == AUDIT:
            if record["kind"] in _POSITION_KINDS:
                payload = record["payload"]
                positions[record["session_id"]] = (payload["to_graph"], payload["to"])
        elif rtype == ALARM_RAISED:
            alarm_states[record["alarm"]["id"]] = "open"
        elif rtype == ALARM_RESOLVED:
            alarm_states[record["alarm_id"]] = record["state"]
    latest = {
        kind.value: (result.reading.value, result.reading.timestamp, result.reading.origin)
        for kind, result in store.snapshot_all(0).items()
        if result.reading is not None
    }
    return ReplayedState(positions=positions, latest=latest, alarm_states=alarm_states)


def state_from_live(sessions: Iterable, store: VitalStore, alarms: Iterable) -> ReplayedState:
    """Same shape as state_from_records, taken from live objects."""
    positions = {s.id: (s.graph.id, s.current) for s in sessions}
    latest = {
        kind.value: (result.reading.value, result.reading.timestamp, result.reading.origin)
        for kind, result in store.snapshot_all(0).items()
        if result.reading is not None
    }
    alarm_states = {a.id: a.state.value for a in alarms}
    return ReplayedState(positions=positions, latest=latest, alarm_states=alarm_states)
