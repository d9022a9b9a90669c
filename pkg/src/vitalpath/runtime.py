"""Wires one patient record, one alarm monitor, and any number of
sessions into a single command-serialized runtime.

The runtime owns the clock, the session log, and the event bus. Every
mutating command goes through it so that log order, event order, and
auto-decide opportunities stay consistent: automation runs after every
manual advance and every accepted ingest, never after an undo.
"""
from __future__ import annotations

import threading
import time
from collections import deque
from typing import Any, Iterable, Mapping

from .alarms import Alarm, AlarmMonitor, AlarmThreshold, OperatorVerdict, VerdictDecision
from .dosage import DosageRule
from .graph import TreatmentGraph
from .navigator import AuditEvent, DEFAULT_CLEAR_MARGIN, Session, StepView, start_session
from .sessionlog import (
    ALARM_RAISED,
    ALARM_RESOLVED,
    AUDIT,
    READING,
    SESSION_START,
    LogRecord,
    ReplayedState,
    SessionLog,
    state_from_live,
)
from .store import (
    CONTROL_CENTER_ORIGIN,
    DEFAULT_STALENESS_MS,
    IngestAck,
    SourceClassViolationError,
    VitalReading,
    VitalStore,
)
from .vitals import SourceClass, VitalKind, canonical_unit, source_class


class UnknownGraphError(Exception):
    def __init__(self, graph_id: str):
        super().__init__(f"unknown graph {graph_id!r}")
        self.graph_id = graph_id


class UnknownSessionError(Exception):
    def __init__(self, session_id: str):
        super().__init__(f"unknown session {session_id!r}")
        self.session_id = session_id


class ManualClock:
    """Test/replay clock; time moves only when told to."""

    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def set(self, now_ms: int) -> None:
        if now_ms < self._now:
            raise ValueError(f"clock cannot go back ({now_ms} < {self._now})")
        self._now = int(now_ms)

    def advance(self, delta_ms: int) -> None:
        self.set(self._now + delta_ms)


class MonotonicClock:
    """Milliseconds since runtime start; immune to wall-clock jumps."""

    def __init__(self):
        self._epoch = time.monotonic()

    def now_ms(self) -> int:
        return int((time.monotonic() - self._epoch) * 1000)


GAP_EVENT = {"event": "gap"}


class Subscription:
    """One subscriber's bounded event queue.

    When the queue is full, new events are dropped; a single gap marker is
    inserted where the loss happened so the client knows to resync.
    """

    def __init__(self, maxsize: int):
        self._maxsize = maxsize
        self._dq: deque[dict[str, Any]] = deque()
        self._gap = False
        self._closed = False
        self._cond = threading.Condition()

    def push(self, event: dict[str, Any]) -> None:
        with self._cond:
            if self._closed:
                return
            if len(self._dq) >= self._maxsize:
                self._gap = True
                return
            if self._gap:
                self._dq.append(dict(GAP_EVENT))
                self._gap = False
            self._dq.append(event)
            self._cond.notify()

    def pop(self, timeout: float | None = None) -> dict[str, Any] | None:
        """Next event, or None on timeout/closed."""
        with self._cond:
            self._cond.wait_for(lambda: self._dq or self._closed, timeout)
            if self._dq:
                return self._dq.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class EventBus:
    DEFAULT_QUEUE = 256

    def __init__(self):
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        self._seq = 0

    def subscribe(self, maxsize: int = DEFAULT_QUEUE) -> Subscription:
        sub = Subscription(maxsize)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub.close()
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, event: dict[str, Any]) -> None:
        """Non-blocking fan-out; slow subscribers lose events, not the bus."""
        with self._lock:
            self._seq += 1
            event = dict(event, stream_seq=self._seq)
            subs = list(self._subs)
        for sub in subs:
            sub.push(event)


def view_payload(view: StepView) -> dict[str, Any]:
    """Wire shape of a StepView, shared by HTTP responses and events."""
    resolved = []
    for rv in view.resolved:
        entry: dict[str, Any] = {
            "kind": rv.requirement.kind.value,
            "unit": canonical_unit(rv.requirement.kind),
            "purpose": rv.requirement.purpose.value,
            "min": rv.requirement.min,
            "max": rv.requirement.max,
            "freshness": rv.freshness.state.value,
        }
        if rv.reading is None:
            entry.update(value=None, timestamp=None, origin=None, range=None, age_ms=None)
        else:
            entry.update(
                value=rv.reading.value,
                timestamp=rv.reading.timestamp,
                origin=rv.reading.origin,
                age_ms=rv.freshness.age_ms,
                range=rv.range_status.state.value if rv.range_status else None,
            )
        resolved.append(entry)
    payload: dict[str, Any] = {
        "graph_id": view.graph_id,
        "node_id": view.node_id,
        "node_kind": view.node_kind.value,
        "text": view.text,
        "resolved": resolved,
        "choices": list(view.choices),
        "terminal": view.terminal,
        "pending_auto": dict(view.pending_auto) if view.pending_auto else None,
        "dosage": None,
        "dosage_error": view.dosage_error,
    }
    if view.dosage is not None:
        payload["dosage"] = {
            "rule_id": view.dosage.rule_id,
            "drug": view.dosage.drug,
            "dose": view.dosage.dose,
            "unit": view.dosage.unit,
            "branch": view.dosage.branch_label,
            "inputs": dict(view.dosage.inputs),
        }
    return payload


class Runtime:
    """Everything behind the HTTP surface, usable directly in-process."""

    def __init__(
        self,
        graphs: Mapping[str, TreatmentGraph],
        *,
        dosage_rules: Mapping[str, DosageRule] | None = None,
        thresholds: Iterable[AlarmThreshold] = (),
        clock: ManualClock | MonotonicClock | None = None,
        staleness_ms: float = DEFAULT_STALENESS_MS,
        clear_margin: float = DEFAULT_CLEAR_MARGIN,
        debounce_ms: int = 60_000,
        log_path: str | None = None,
    ):
        self.clock = clock if clock is not None else MonotonicClock()
        self.graphs = dict(graphs)
        self.dosage_rules = dict(dosage_rules or {})
        self.clear_margin = clear_margin
        self.store = VitalStore(staleness_ms)
        self.log = SessionLog(log_path)
        self.bus = EventBus()
        self.monitor = AlarmMonitor(
            list(thresholds),
            self.store,
            debounce_ms=debounce_ms,
            on_raise=self._alarm_raised,
            on_resolve=self._alarm_resolved,
        )
        self.sessions: dict[str, Session] = {}
        self._creation_order: list[str] = []
        self._session_counter = 0
        self._lock = threading.RLock()

    def now(self) -> int:
        return self.clock.now_ms()

    # -- sessions ---------------------------------------------------------------

    def create_session(self, graph_id: str) -> Session:
        with self._lock:
            graph = self.graphs.get(graph_id)
            if graph is None:
                raise UnknownGraphError(graph_id)
            now = self.now()
            self._session_counter += 1
            session_id = f"s{self._session_counter}"
            session = start_session(
                graph,
                self.store,
                session_id=session_id,
                dosage_rules=self.dosage_rules,
                clear_margin=self.clear_margin,
                graphs=self.graphs,
                audit_sink=self._on_audit,
            )
            self.sessions[session_id] = session
            self._creation_order.append(session_id)
            self.log.append(
                SESSION_START,
                now,
                session_id=session_id,
                graph_id=graph.id,
                node_id=graph.entry,
            )
            self._publish_view(session, now)
            return session

    def session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(session_id)
        return session

    def _context_session(self) -> Session | None:
        """Alarms snapshot the most recently opened session's step."""
        if not self._creation_order:
            return None
        return self.sessions[self._creation_order[-1]]

    # -- log/event plumbing -------------------------------------------------------

    def _on_audit(self, session_id: str, event: AuditEvent) -> None:
        self.log.append(
            AUDIT,
            event.timestamp,
            session_id=session_id,
            audit_seq=event.seq,
            kind=event.kind.value,
            node_id=event.node_id,
            payload=dict(event.payload),
        )

    def _alarm_raised(self, alarm: Alarm) -> None:
        self.log.append(ALARM_RAISED, alarm.raised_at, alarm=alarm.payload())
        self.bus.publish({"event": "alarm", "alarm": alarm.payload()})

    def _alarm_resolved(self, alarm: Alarm) -> None:
        verdict = alarm.verdict
        self.log.append(
            ALARM_RESOLVED,
            alarm.resolved_at if alarm.resolved_at is not None else self.now(),
            alarm_id=alarm.id,
            state=alarm.state.value,
            verdict={
                "decision": verdict.decision.value,
                "target_graph": verdict.target_graph,
                "target_node": verdict.target_node,
                "timestamp": verdict.timestamp,
            }
            if verdict is not None
            else None,
        )
        self.bus.publish({"event": "alarm_resolved", "alarm": alarm.payload()})

    def _publish_view(self, session: Session, now: int) -> None:
        view = session.view(now)
        self.bus.publish(
            {
                "event": "view",
                "session_id": session.id,
                "audit_seq": len(session.audit),
                "view": view_payload(view),
            }
        )

    # -- ingestion ----------------------------------------------------------------

    def ingest(self, reading: VitalReading) -> IngestAck:
        """Accept a reading, log it, check alarms, then let automation look.

        Duplicates are acknowledged but change nothing. Out-of-range values
        raise UnitMismatchError to the transport, which counts them.
        """
        with self._lock:
            now = self.now()
            ack = self.store.ingest_reading(reading)
            if not ack.accepted:
                return ack
            self.log.append(
                READING,
                now,
                kind=reading.kind.value,
                value=reading.value,
                timestamp=reading.timestamp,
                origin=reading.origin,
                latest_updated=ack.latest_updated,
            )
            self.bus.publish(
                {
                    "event": "vitals",
                    "kind": reading.kind.value,
                    "value": reading.value,
                    "timestamp": reading.timestamp,
                    "origin": reading.origin,
                }
            )
            self.monitor.evaluate_reading(reading, now, session=self._context_session())
            self._run_auto_decide(now)
            return ack

    def patient_entry(self, kind: VitalKind, value: float) -> IngestAck:
        """Control-center entry (age, weight, preconditions...); timestamped now."""
        if source_class(kind) is not SourceClass.DATABASE_ENTRY:
            raise SourceClassViolationError(kind)
        with self._lock:
            reading = VitalReading(
                kind=kind, value=float(value), timestamp=self.now(), origin=CONTROL_CENTER_ORIGIN
            )
            return self.ingest(reading)

    # -- automation -----------------------------------------------------------------

    def _run_auto_decide(self, now: int) -> None:
        """Give every session its chance to auto-advance; consecutive clear
        decisions chain, capped at the graph's node count so decision
        cycles cannot spin forever."""
        for session_id in self._creation_order:
            session = self.sessions[session_id]
            steps = 0
            cap = len(session.graph.nodes)
            while steps < cap:
                view = session.try_auto_decide(now)
                if view is None:
                    break
                steps += 1
                self._publish_view(session, now)

    # -- operator commands -------------------------------------------------------------

    def advance(self, session_id: str, choice: str) -> StepView:
        with self._lock:
            session = self.session(session_id)
            now = self.now()
            session.advance(choice, now)
            self._publish_view(session, now)
            self._run_auto_decide(now)
            return session.view(now)

    def undo(self, session_id: str) -> StepView:
        """Step back exactly once; automation stays quiet afterwards."""
        with self._lock:
            session = self.session(session_id)
            now = self.now()
            view = session.undo(now)
            self._publish_view(session, now)
            return view

    def record_verdict(self, session_id: str, kind: VitalKind, accept: bool) -> StepView:
        with self._lock:
            session = self.session(session_id)
            now = self.now()
            session.record_verdict(kind, accept, now)
            self._publish_view(session, now)
            return session.view(now)

    def alarm_verdict(
        self,
        alarm_id: str,
        decision: VerdictDecision,
        *,
        target_graph: str | None = None,
        target_node: str | None = None,
    ) -> Alarm:
        with self._lock:
            now = self.now()
            verdict = OperatorVerdict(
                alarm_id=alarm_id,
                decision=decision,
                timestamp=now,
                target_graph=target_graph,
                target_node=target_node,
            )
            alarm = self.monitor.get(alarm_id)
            session = self.sessions.get(alarm.session_id or "") or self._context_session()
            alarm = self.monitor.resolve_alarm(
                alarm_id, verdict, now, session=session, graphs=self.graphs
            )
            if decision is VerdictDecision.ACCEPT_CHANGE and session is not None:
                self._publish_view(session, now)
                self._run_auto_decide(now)
            return alarm

    # -- read side -----------------------------------------------------------------------

    def view(self, session_id: str) -> StepView:
        with self._lock:
            return self.session(session_id).view(self.now())

    def vitals_snapshot(self) -> dict[str, Any]:
        now = self.now()
        snapshot = self.store.snapshot_all(now)
        out = {}
        for kind, (reading, freshness) in sorted(snapshot.items(), key=lambda kv: kv[0].value):
            assert reading is not None
            out[kind.value] = {
                "value": reading.value,
                "timestamp": reading.timestamp,
                "origin": reading.origin,
                "unit": canonical_unit(kind),
                "state": freshness.state.value,
                "age_ms": freshness.age_ms,
            }
        return {"now": now, "vitals": out}

    def export_session(self, session_id: str) -> list[LogRecord]:
        self.session(session_id)  # raises UnknownSessionError
        return self.log.export_session(session_id)

    def live_state(self) -> ReplayedState:
        with self._lock:
            return state_from_live(
                self.sessions.values(), self.store, self.monitor.list_alarms()
            )

    def close(self) -> None:
        self.log.close()
