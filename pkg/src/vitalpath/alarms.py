"""Threshold alarms with operator review.

A global threshold table is checked against every accepted reading,
independent of the current treatment step. A breach raises an alarm that
freezes the breaching reading, the full vitals map, and the step it
interrupted. Repeat breaches of the same threshold are debounced while an
open alarm is recent. Operators resolve each alarm exactly once: dismiss
leaves the session alone, accept_change jumps it to the proposed node
through the regular audited path.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Mapping

from .graph import TreatmentGraph
from .navigator import Session
from .store import Freshness, VitalReading, VitalStore
from .vitals import VitalKind, parse_kind

DEFAULT_DEBOUNCE_MS = 60_000


class ThresholdFormatError(ValueError):
    """Threshold table file violates the expected shape."""


class UnknownAlarmError(Exception):
    def __init__(self, alarm_id: str):
        super().__init__(f"unknown alarm {alarm_id!r}")
        self.alarm_id = alarm_id


class AlreadyResolvedError(Exception):
    def __init__(self, alarm_id: str, state: "AlarmState"):
        super().__init__(f"alarm {alarm_id!r} already {state.value}")
        self.alarm_id = alarm_id
        self.state = state


class MissingTargetError(Exception):
    """accept_change without any node to jump to."""


class ThresholdSource(str, Enum):
    NODE_REQUIREMENT = "node_requirement"
    GLOBAL_TABLE = "global_table"


@dataclass(frozen=True)
class AlarmThreshold:
    """One row of the threshold table. At least one bound is required.

    target_graph/target_node optionally name the path change an accepted
    alarm should jump to; without them the alarm is informational.
    """

    kind: VitalKind
    min: float | None = None
    max: float | None = None
    source: ThresholdSource = ThresholdSource.GLOBAL_TABLE
    target_graph: str | None = None
    target_node: str | None = None

    def __post_init__(self):
        if self.min is None and self.max is None:
            raise ThresholdFormatError(f"threshold for {self.kind.value} has no bounds")
        if self.min is not None and self.max is not None and self.min > self.max:
            raise ThresholdFormatError(
                f"threshold for {self.kind.value}: min {self.min} > max {self.max}"
            )

    def breach(self, value: float) -> str | None:
        """Direction of the violation, or None when the value is in range."""
        if self.min is not None and value < self.min:
            return "below_min"
        if self.max is not None and value > self.max:
            return "above_max"
        return None


class AlarmState(str, Enum):
    OPEN = "open"
    ACCEPTED = "accepted"
    DISMISSED = "dismissed"


class VerdictDecision(str, Enum):
    ACCEPT_CHANGE = "accept_change"
    DISMISS = "dismiss"


@dataclass(frozen=True)
class OperatorVerdict:
    alarm_id: str
    decision: VerdictDecision
    timestamp: int
    target_graph: str | None = None
    target_node: str | None = None


@dataclass
class Alarm:
    """A breach frozen at raise time. Only `state`, `resolved_at` and
    `verdict` ever change, and only once."""

    id: str
    raised_at: int
    reading: VitalReading
    breach_direction: str
    threshold: AlarmThreshold
    snapshot: Mapping[VitalKind, tuple[VitalReading, Freshness]]
    session_id: str | None
    node_id: str | None
    state: AlarmState = AlarmState.OPEN
    resolved_at: int | None = None
    verdict: OperatorVerdict | None = None

    @property
    def open(self) -> bool:
        return self.state is AlarmState.OPEN

    def payload(self) -> dict[str, Any]:
        """Wire shape, shared by the HTTP listing and the event stream."""
        return {
            "id": self.id,
            "raised_at": self.raised_at,
            "state": self.state.value,
            "kind": self.reading.kind.value,
            "value": self.reading.value,
            "value_timestamp": self.reading.timestamp,
            "origin": self.reading.origin,
            "breach": self.breach_direction,
            "threshold": {
                "min": self.threshold.min,
                "max": self.threshold.max,
                "target_graph": self.threshold.target_graph,
                "target_node": self.threshold.target_node,
            },
            "session_id": self.session_id,
            "node_id": self.node_id,
            "resolved_at": self.resolved_at,
            "snapshot": {
                kind.value: {
                    "value": reading.value,
                    "timestamp": reading.timestamp,
                    "state": freshness.state.value,
                }
                for kind, (reading, freshness) in sorted(
                    self.snapshot.items(), key=lambda item: item[0].value
                )
            },
        }


AlarmCallback = Callable[[Alarm], None]


class AlarmMonitor:
    """Evaluates readings against the threshold table and tracks verdicts.

    Thread-safe: evaluation arrives on the ingest thread while verdicts
    come from request handlers.
    """

    def __init__(
        self,
        thresholds: list[AlarmThreshold],
        store: VitalStore,
        *,
        debounce_ms: int = DEFAULT_DEBOUNCE_MS,
        on_raise: AlarmCallback | None = None,
        on_resolve: AlarmCallback | None = None,
    ):
        self.thresholds = list(thresholds)
        self.store = store
        self.debounce_ms = debounce_ms
        self._on_raise = on_raise
        self._on_resolve = on_resolve
        self._alarms: list[Alarm] = []
        self._by_id: dict[str, Alarm] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def _debounced(self, threshold: AlarmThreshold, now: int) -> bool:
        """True while an open alarm for the same threshold is recent.

        Resolved alarms never block: the operator already dealt with them.
        """
        for alarm in self._alarms:
            if (
                alarm.open
                and alarm.threshold == threshold
                and now - alarm.raised_at < self.debounce_ms
            ):
                return True
        return False

    def evaluate_reading(
        self, reading: VitalReading, now: int, *, session: Session | None = None
    ) -> Alarm | None:
        """Raise an alarm for the first breached, non-debounced threshold."""
        with self._lock:
            for threshold in self.thresholds:
                if threshold.kind is not reading.kind:
                    continue
                direction = threshold.breach(reading.value)
                if direction is None or self._debounced(threshold, now):
                    continue
                snapshot = MappingProxyType(dict(self.store.snapshot_all(now)))
                self._counter += 1
                alarm = Alarm(
                    id=f"a{self._counter}",
                    raised_at=now,
                    reading=reading,
                    breach_direction=direction,
                    threshold=threshold,
                    snapshot=snapshot,
                    session_id=session.id if session is not None else None,
                    node_id=session.current if session is not None else None,
                )
                self._alarms.append(alarm)
                self._by_id[alarm.id] = alarm
                callback = self._on_raise
                break
            else:
                return None
        if callback is not None:
            callback(alarm)
        return alarm

    def resolve_alarm(
        self,
        alarm_id: str,
        verdict: OperatorVerdict,
        now: int,
        *,
        session: Session | None = None,
        graphs: Mapping[str, TreatmentGraph] | None = None,
    ) -> Alarm:
        """Apply the operator's verdict; resolution is terminal.

        accept_change jumps the session to the verdict's target, falling
        back to the threshold's mapping. Dismiss leaves the session as-is.
        """
        with self._lock:
            alarm = self._by_id.get(alarm_id)
            if alarm is None:
                raise UnknownAlarmError(alarm_id)
            if not alarm.open:
                raise AlreadyResolvedError(alarm_id, alarm.state)
            if verdict.decision is VerdictDecision.ACCEPT_CHANGE:
                target_node = verdict.target_node or alarm.threshold.target_node
                if target_node is None:
                    raise MissingTargetError(f"alarm {alarm_id!r} proposes no path change")
                if session is None:
                    raise MissingTargetError(f"alarm {alarm_id!r}: no session to move")
                target_graph_id = (
                    verdict.target_graph or alarm.threshold.target_graph or session.graph.id
                )
                registry = graphs if graphs is not None else session.graphs
                graph = registry.get(target_graph_id)
                if graph is None:
                    raise MissingTargetError(
                        f"alarm {alarm_id!r}: unknown target graph {target_graph_id!r}"
                    )
                session.jump_to(
                    graph,
                    target_node,
                    now,
                    alarm_payload={
                        "alarm_id": alarm.id,
                        "kind": alarm.reading.kind.value,
                        "value": alarm.reading.value,
                        "breach": alarm.breach_direction,
                        "threshold_min": alarm.threshold.min,
                        "threshold_max": alarm.threshold.max,
                        "raised_at": alarm.raised_at,
                        "decision": verdict.decision.value,
                    },
                )
                alarm.state = AlarmState.ACCEPTED
            else:
                alarm.state = AlarmState.DISMISSED
            alarm.resolved_at = now
            alarm.verdict = verdict
        if self._on_resolve is not None:
            self._on_resolve(alarm)
        return alarm

    def get(self, alarm_id: str) -> Alarm:
        with self._lock:
            alarm = self._by_id.get(alarm_id)
        if alarm is None:
            raise UnknownAlarmError(alarm_id)
        return alarm

    def list_alarms(self, state: AlarmState | None = None) -> tuple[Alarm, ...]:
        """All alarms in raise order, optionally filtered by state."""
        with self._lock:
            if state is None:
                return tuple(self._alarms)
            return tuple(a for a in self._alarms if a.state is state)


def parse_thresholds(payload: Any) -> list[AlarmThreshold]:
    """Parse the threshold table: a JSON array of objects with `kind` and
    at least one of `min`/`max`, plus an optional jump target."""
    if not isinstance(payload, list):
        raise ThresholdFormatError("threshold table must be a JSON array")
    allowed = {"kind", "min", "max", "target_graph", "target_node"}
    thresholds = []
    for i, entry in enumerate(payload):
        if not isinstance(entry, dict):
            raise ThresholdFormatError(f"threshold {i}: expected an object")
        extra = set(entry) - allowed
        if extra:
            raise ThresholdFormatError(f"threshold {i}: unknown fields {sorted(extra)}")
        if "kind" not in entry:
            raise ThresholdFormatError(f"threshold {i}: missing kind")
        kind = parse_kind(entry["kind"])
        for bound in ("min", "max"):
            if bound in entry and not isinstance(entry[bound], (int, float)):
                raise ThresholdFormatError(f"threshold {i}: {bound} must be a number")
        for name in ("target_graph", "target_node"):
            if name in entry and not isinstance(entry[name], str):
                raise ThresholdFormatError(f"threshold {i}: {name} must be a string")
        try:
            thresholds.append(
                AlarmThreshold(
                    kind=kind,
                    min=entry.get("min"),
                    max=entry.get("max"),
                    target_graph=entry.get("target_graph"),
                    target_node=entry.get("target_node"),
                )
            )
        except ThresholdFormatError as exc:
            raise ThresholdFormatError(f"threshold {i}: {exc}") from exc
    return thresholds


def load_thresholds(path: str | Path) -> list[AlarmThreshold]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ThresholdFormatError(f"{path}: {exc}") from exc
    return parse_thresholds(payload)
