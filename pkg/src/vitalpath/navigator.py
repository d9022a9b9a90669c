"""Session state machine over a treatment graph.

Serves step views with every requirement resolved from the vital store,
evaluates inclusive min/max ranges, advances manually along labeled edges,
auto-decides binary decisions when a fresh value clears the bounds by a
configurable margin, and undoes any advance. Every decision (manual,
automated, or undone) lands in an append-only audit log whose replay
reconstructs the path exactly.

Auto-decide is deliberately conservative: it never acts on unknown, stale,
declined, or boundary values, and an undone automated decision stays
suppressed on that node until a new reading arrives.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Mapping

from .dosage import DosageError, DosageResult, DosageRule, MissingDependencyError, compute_dosage
from .graph import (
    LABEL_NO,
    LABEL_YES,
    NodeKind,
    Purpose,
    TreatmentGraph,
    TreatmentNode,
    VitalRequirement,
)
from .store import Freshness, VitalReading, VitalStore
from .validate import validate_graph
from .vitals import VitalKind

DEFAULT_CLEAR_MARGIN = 0.10
# Clearance never shrinks below one canonical unit, so bounds near zero
# cannot be "cleared" by rounding noise.
MIN_CLEARANCE_UNITS = 1.0


class InvalidGraphError(Exception):
    """Session refused: the graph has validation findings."""


class InvalidChoiceError(Exception):
    def __init__(self, choice: str, available: tuple[str, ...]):
        super().__init__(f"choice {choice!r} not in {list(available)}")
        self.choice = choice
        self.available = available


class TerminalReachedError(Exception):
    """The current node has no outgoing edges."""


class NothingToUndoError(Exception):
    """Undo at session start."""


class UnknownRequirementError(Exception):
    def __init__(self, kind: VitalKind, node_id: str):
        super().__init__(f"node {node_id!r} has no requirement for {kind.value}")
        self.kind = kind
        self.node_id = node_id


class RangeState(str, Enum):
    IN_RANGE = "in_range"
    BELOW_MIN = "below_min"
    ABOVE_MAX = "above_max"
    NO_BOUNDS = "no_bounds"


@dataclass(frozen=True)
class RangeStatus:
    state: RangeState
    delta: float | None = None

    @property
    def out_of_range(self) -> bool:
        return self.state in (RangeState.BELOW_MIN, RangeState.ABOVE_MAX)


def evaluate_range(value: float, minimum: float | None, maximum: float | None) -> RangeStatus:
    """Classify a value against inclusive bounds; a missing bound is open."""
    if minimum is None and maximum is None:
        return RangeStatus(RangeState.NO_BOUNDS)
    if minimum is not None and value < minimum:
        return RangeStatus(RangeState.BELOW_MIN, delta=minimum - value)
    if maximum is not None and value > maximum:
        return RangeStatus(RangeState.ABOVE_MAX, delta=value - maximum)
    return RangeStatus(RangeState.IN_RANGE)


@dataclass(frozen=True)
class ResolvedVital:
    """One requirement joined with what the store currently knows."""

    requirement: VitalRequirement
    reading: VitalReading | None
    freshness: Freshness
    range_status: RangeStatus | None

    @property
    def known(self) -> bool:
        return self.reading is not None


@dataclass(frozen=True)
class StepView:
    graph_id: str
    node_id: str
    node_kind: NodeKind
    text: str
    resolved: tuple[ResolvedVital, ...]
    choices: tuple[str, ...]
    terminal: bool
    pending_auto: Mapping[str, Any] | None = None
    dosage: DosageResult | None = None
    dosage_error: str | None = None


class AuditKind(str, Enum):
    MANUAL_ADVANCE = "manual_advance"
    AUTO_ADVANCE = "auto_advance"
    UNDO = "undo"
    VALUE_ACCEPTED = "value_accepted"
    VALUE_DECLINED = "value_declined"
    ALARM_SEEN = "alarm_seen"


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: int
    kind: AuditKind
    node_id: str
    payload: Mapping[str, Any]


class Cause(str, Enum):
    MANUAL = "manual"
    AUTOMATED = "automated"


@dataclass
class _HistoryEntry:
    graph: TreatmentGraph
    node_id: str
    cause: Cause
    event_seq: int


def required_clearance(bound: float, margin: float) -> float:
    return max(margin * abs(bound), MIN_CLEARANCE_UNITS)


def clear_direction(
    value: float, minimum: float | None, maximum: float | None, margin: float
) -> tuple[str, str, list[dict[str, float]]] | None:
    """Decide whether a value points clearly at a branch.

    Returns (branch_label, direction, checks) when the value clears every
    relevant bound by more than the margin, else None. Out-of-range values
    map to the `yes` branch, clearly in-range values to `no`. Each check
    records the bound, the distance to it, and the clearance it required,
    so the decision is auditable from the payload alone.
    """
    status = evaluate_range(value, minimum, maximum)
    if status.state is RangeState.NO_BOUNDS:
        return None
    if status.state is RangeState.BELOW_MIN:
        assert minimum is not None
        check = {
            "bound": "min",
            "bound_value": minimum,
            "distance": minimum - value,
            "required": required_clearance(minimum, margin),
        }
        if check["distance"] > check["required"]:
            return LABEL_YES, "below_min", [check]
        return None
    if status.state is RangeState.ABOVE_MAX:
        assert maximum is not None
        check = {
            "bound": "max",
            "bound_value": maximum,
            "distance": value - maximum,
            "required": required_clearance(maximum, margin),
        }
        if check["distance"] > check["required"]:
            return LABEL_YES, "above_max", [check]
        return None
    checks: list[dict[str, float]] = []
    if minimum is not None:
        checks.append(
            {
                "bound": "min",
                "bound_value": minimum,
                "distance": value - minimum,
                "required": required_clearance(minimum, margin),
            }
        )
    if maximum is not None:
        checks.append(
            {
                "bound": "max",
                "bound_value": maximum,
                "distance": maximum - value,
                "required": required_clearance(maximum, margin),
            }
        )
    if all(check["distance"] > check["required"] for check in checks):
        return LABEL_NO, "in_range", checks
    return None


AuditSink = Callable[[str, AuditEvent], None]


class Session:
    """One operator navigating one (or, after alarm jumps, more) graph(s).

    Not thread-safe on its own: the owning runtime serializes commands.
    Sessions on the same graph are fully independent.
    """

    def __init__(
        self,
        session_id: str,
        graph: TreatmentGraph,
        store: VitalStore,
        *,
        dosage_rules: Mapping[str, DosageRule] | None = None,
        clear_margin: float = DEFAULT_CLEAR_MARGIN,
        graphs: Mapping[str, TreatmentGraph] | None = None,
        audit_sink: AuditSink | None = None,
    ):
        self.id = session_id
        self.graph = graph
        self.store = store
        self.clear_margin = clear_margin
        self.dosage_rules = dict(dosage_rules or {})
        self.graphs = dict(graphs or {})
        self.graphs.setdefault(graph.id, graph)
        self.current = graph.entry
        self.audit: list[AuditEvent] = []
        self._history: list[_HistoryEntry] = []
        self._seq = 0
        self._pending_auto: dict[str, Any] | None = None
        # (node_id, reading identity) pairs whose automated decision was undone
        self._suppressed: set[tuple[str, tuple]] = set()
        # reading identities the operator declined
        self._declined: set[tuple] = set()
        self._audit_sink = audit_sink

    # -- audit ---------------------------------------------------------------

    def _record(self, kind: AuditKind, node_id: str, payload: Mapping[str, Any], now: int) -> AuditEvent:
        self._seq += 1
        event = AuditEvent(seq=self._seq, timestamp=now, kind=kind, node_id=node_id, payload=payload)
        self.audit.append(event)
        if self._audit_sink is not None:
            self._audit_sink(self.id, event)
        return event

    def audit_log(self) -> tuple[AuditEvent, ...]:
        return tuple(self.audit)

    @property
    def path(self) -> tuple[str, ...]:
        """Node ids from entry to current, per the history stack."""
        return tuple(entry.node_id for entry in self._history) + (self.current,)

    @property
    def depth(self) -> int:
        return len(self._history)

    # -- views ----------------------------------------------------------------

    def _node(self) -> TreatmentNode:
        return self.graph.node(self.current)

    def _resolve(self, req: VitalRequirement, now: int) -> ResolvedVital:
        reading, freshness = self.store.latest(req.kind, now)
        if reading is None:
            return ResolvedVital(requirement=req, reading=None, freshness=freshness, range_status=None)
        return ResolvedVital(
            requirement=req,
            reading=reading,
            freshness=freshness,
            range_status=evaluate_range(reading.value, req.min, req.max),
        )

    def view(self, now: int) -> StepView:
        """Resolve every requirement of the current node, in declared order."""
        node = self._node()
        resolved = tuple(self._resolve(req, now) for req in node.requirements)
        dosage = None
        dosage_error = None
        if node.kind is NodeKind.MEDICATION:
            rule = self.dosage_rules.get(node.dosage_rule_id or "")
            if rule is None:
                dosage_error = f"unknown dosage rule {node.dosage_rule_id!r}"
            else:
                try:
                    dosage = compute_dosage(rule, self.store, now)
                except MissingDependencyError as exc:
                    dosage_error = f"missing input: {exc.kind.value}"
                except DosageError as exc:
                    dosage_error = str(exc)
        choices = self.graph.choices(self.current)
        return StepView(
            graph_id=self.graph.id,
            node_id=node.id,
            node_kind=node.kind,
            text=node.text,
            resolved=resolved,
            choices=choices,
            terminal=not choices,
            pending_auto=self._pending_auto,
            dosage=dosage,
            dosage_error=dosage_error,
        )

    # -- advancing -------------------------------------------------------------

    def _move(self, target: str, cause: Cause, event: AuditEvent, graph: TreatmentGraph | None = None) -> None:
        self._history.append(
            _HistoryEntry(graph=self.graph, node_id=self.current, cause=cause, event_seq=event.seq)
        )
        if graph is not None:
            self.graph = graph
        self.current = target

    def advance(self, choice: str, now: int) -> StepView:
        """Follow the outgoing edge with the given label."""
        outgoing = self.graph.outgoing(self.current)
        if not outgoing:
            raise TerminalReachedError(f"node {self.current!r} is terminal")
        edge = next((e for e in outgoing if e.label == choice), None)
        if edge is None:
            raise InvalidChoiceError(choice, self.graph.choices(self.current))
        event = self._record(
            AuditKind.MANUAL_ADVANCE,
            self.current,
            {
                "from_graph": self.graph.id,
                "from": self.current,
                "to_graph": self.graph.id,
                "to": edge.target,
                "choice": choice,
            },
            now,
        )
        self._pending_auto = None
        self._move(edge.target, Cause.MANUAL, event)
        return self.view(now)

    def try_auto_decide(self, now: int) -> StepView | None:
        """Advance past the current decision if one fresh value clearly
        settles it; otherwise leave the decision with the operator.

        Fires only on decision nodes with exactly one decision-purpose
        requirement, a fresh, untainted reading, a clearance beyond the
        margin, and an outgoing edge matching the decided branch.
        """
        node = self._node()
        if node.kind is not NodeKind.DECISION:
            return None
        decision_reqs = [r for r in node.requirements if r.purpose is Purpose.DECISION]
        if len(decision_reqs) != 1:
            return None
        req = decision_reqs[0]
        reading, freshness = self.store.latest(req.kind, now)
        if reading is None or not freshness.is_fresh:
            return None
        identity = reading.identity()
        if identity in self._declined:
            return None
        if (self.current, identity) in self._suppressed:
            return None
        decision = clear_direction(reading.value, req.min, req.max, self.clear_margin)
        if decision is None:
            return None
        branch, direction, checks = decision
        edge = next((e for e in self.graph.outgoing(self.current) if e.label == branch), None)
        if edge is None:
            return None
        payload: dict[str, Any] = {
            "from_graph": self.graph.id,
            "from": self.current,
            "to_graph": self.graph.id,
            "to": edge.target,
            "choice": branch,
            "direction": direction,
            "kind": req.kind.value,
            "value": reading.value,
            "value_timestamp": reading.timestamp,
            "origin": reading.origin,
            "freshness": freshness.state.value,
            "age_ms": freshness.age_ms,
            "min": req.min,
            "max": req.max,
            "margin": self.clear_margin,
            "checks": checks,
        }
        event = self._record(AuditKind.AUTO_ADVANCE, self.current, payload, now)
        self._pending_auto = dict(payload, seq=event.seq)
        self._move(edge.target, Cause.AUTOMATED, event)
        return self.view(now)

    def undo(self, now: int) -> StepView:
        """Restore the node before the last advance; audited, never deleted.

        An undone automated decision is suppressed on that node until a new
        reading arrives.
        """
        if not self._history:
            raise NothingToUndoError("session is at its starting node")
        entry = self._history.pop()
        reverted = next(e for e in self.audit if e.seq == entry.event_seq)
        self._record(
            AuditKind.UNDO,
            self.current,
            {
                "reverted_seq": entry.event_seq,
                "from_graph": self.graph.id,
                "from": self.current,
                "to_graph": entry.graph.id,
                "to": entry.node_id,
            },
            now,
        )
        if entry.cause is Cause.AUTOMATED:
            identity = (
                reverted.payload["kind"],
                reverted.payload["value"],
                reverted.payload["value_timestamp"],
                reverted.payload["origin"],
            )
            self._suppressed.add((entry.node_id, identity))
        self.graph = entry.graph
        self.current = entry.node_id
        self._pending_auto = None
        return self.view(now)

    def jump_to(
        self,
        graph: TreatmentGraph,
        node_id: str,
        now: int,
        *,
        alarm_payload: Mapping[str, Any],
    ) -> StepView:
        """Operator-accepted path change proposed by an alarm.

        Audited as the alarm sighting followed by a manual advance, so undo
        and replay treat the jump like any other operator move.
        """
        graph.node(node_id)  # raises UnknownNodeError
        self._record(AuditKind.ALARM_SEEN, self.current, dict(alarm_payload), now)
        event = self._record(
            AuditKind.MANUAL_ADVANCE,
            self.current,
            {
                "from_graph": self.graph.id,
                "from": self.current,
                "to_graph": graph.id,
                "to": node_id,
                "choice": None,
                "via_alarm": alarm_payload.get("alarm_id"),
            },
            now,
        )
        self._pending_auto = None
        self.graphs.setdefault(graph.id, graph)
        self._move(node_id, Cause.MANUAL, event, graph=graph)
        return self.view(now)

    # -- verdicts ---------------------------------------------------------------

    def record_verdict(self, kind: VitalKind, accept: bool, now: int) -> AuditEvent:
        """Operator accepts or declines the displayed value for a requirement.

        A declined reading is quarantined for auto-decide until a newer
        reading supersedes it (per-reading, not per-kind).
        """
        node = self._node()
        req = next((r for r in node.requirements if r.kind is kind), None)
        if req is None:
            raise UnknownRequirementError(kind, node.id)
        reading, _ = self.store.latest(kind, now)
        payload: dict[str, Any] = {"kind": kind.value}
        if reading is not None:
            payload.update(
                value=reading.value,
                value_timestamp=reading.timestamp,
                origin=reading.origin,
            )
            if not accept:
                self._declined.add(reading.identity())
        return self._record(
            AuditKind.VALUE_ACCEPTED if accept else AuditKind.VALUE_DECLINED,
            node.id,
            payload,
            now,
        )


def start_session(
    graph: TreatmentGraph,
    store: VitalStore,
    *,
    session_id: str = "s1",
    dosage_rules: Mapping[str, DosageRule] | None = None,
    clear_margin: float = DEFAULT_CLEAR_MARGIN,
    graphs: Mapping[str, TreatmentGraph] | None = None,
    audit_sink: AuditSink | None = None,
) -> Session:
    """Open a session at the graph's entry; refuses graphs with findings."""
    report = validate_graph(graph)
    if not report.ok:
        raise InvalidGraphError(
            f"graph {graph.id!r} failed validation: "
            + "; ".join(f.detail for f in report.findings)
        )
    return Session(
        session_id,
        graph,
        store,
        dosage_rules=dosage_rules,
        clear_margin=clear_margin,
        graphs=graphs,
        audit_sink=audit_sink,
    )
