"""Runtime wiring: clocks, event bus, command serialization, automation."""
from __future__ import annotations

import json
import threading

import pytest

from vitalpath.alarms import VerdictDecision
from vitalpath.graph import parse_graph
from vitalpath.navigator import AuditKind
from vitalpath.runtime import (
    EventBus,
    ManualClock,
    MonotonicClock,
    Runtime,
    Subscription,
    UnknownGraphError,
    UnknownSessionError,
    view_payload,
)
from vitalpath.sessionlog import state_from_records
from vitalpath.store import SourceClassViolationError, VitalReading
from vitalpath.vitals import VitalKind


def reading(kind, value, timestamp, origin="dev1"):
    return VitalReading(kind=kind, value=value, timestamp=timestamp, origin=origin)


def drain(sub):
    events = []
    while True:
        event = sub.pop(timeout=0)
        if event is None:
            return events
        events.append(event)


# -- clocks ------------------------------------------------------------------------


def test_manual_clock_never_goes_back():
    clock = ManualClock(100)
    clock.advance(50)
    assert clock.now_ms() == 150
    with pytest.raises(ValueError):
        clock.set(149)
    clock.set(150)  # standing still is fine


def test_monotonic_clock_non_decreasing():
    clock = MonotonicClock()
    samples = [clock.now_ms() for _ in range(100)]
    assert samples == sorted(samples)
    assert samples[0] >= 0


# -- subscriptions and bus -----------------------------------------------------------


def test_subscription_is_fifo_with_timeout():
    sub = Subscription(maxsize=8)
    sub.push({"n": 1})
    sub.push({"n": 2})
    assert sub.pop(timeout=0) == {"n": 1}
    assert sub.pop(timeout=0) == {"n": 2}
    assert sub.pop(timeout=0.01) is None


def test_overflow_drops_events_and_marks_the_gap():
    sub = Subscription(maxsize=2)
    for n in range(5):
        sub.push({"n": n})
    assert sub.pop(timeout=0) == {"n": 0}
    assert sub.pop(timeout=0) == {"n": 1}
    # queue has room again: the next event is preceded by a gap marker
    sub.push({"n": 5})
    assert sub.pop(timeout=0) == {"event": "gap"}
    assert sub.pop(timeout=0) == {"n": 5}


def test_close_unblocks_waiting_pop():
    sub = Subscription(maxsize=4)
    results = []
    thread = threading.Thread(target=lambda: results.append(sub.pop(timeout=5)))
    thread.start()
    sub.close()
    thread.join(timeout=2)
    assert not thread.is_alive()
    assert results == [None]
    sub.push({"n": 1})  # ignored after close
    assert sub.pop(timeout=0) is None


def test_bus_fans_out_with_increasing_stream_seq():
    bus = EventBus()
    a, b = bus.subscribe(), bus.subscribe()
    bus.publish({"event": "x"})
    bus.publish({"event": "y"})
    for sub in (a, b):
        events = drain(sub)
        assert [e["event"] for e in events] == ["x", "y"]
        assert [e["stream_seq"] for e in events] == [1, 2]
    bus.unsubscribe(a)
    bus.publish({"event": "z"})
    assert drain(a) == []
    assert [e["event"] for e in drain(b)] == ["z"]


# -- sessions ---------------------------------------------------------------------


def test_create_session_assigns_ids_and_logs(make_runtime):
    runtime = make_runtime()
    first = runtime.create_session("hypoglycemia")
    second = runtime.create_session("airway_check")
    assert (first.id, second.id) == ("s1", "s2")
    starts = [r for r in runtime.log.records() if r["type"] == "session_start"]
    assert [(r["session_id"], r["graph_id"], r["node_id"]) for r in starts] == [
        ("s1", "hypoglycemia", "assess"),
        ("s2", "airway_check", "spo2_check"),
    ]


def test_create_session_for_unknown_graph_raises(make_runtime):
    with pytest.raises(UnknownGraphError):
        make_runtime().create_session("nope")


def test_view_for_unknown_session_raises(make_runtime):
    with pytest.raises(UnknownSessionError):
        make_runtime().view("s9")


# -- ingestion --------------------------------------------------------------------


def test_ingest_logs_publishes_and_dedups(make_runtime):
    runtime = make_runtime()
    sub = runtime.bus.subscribe()
    r = reading(VitalKind.HEART_FREQUENCY, 80, 10)
    assert runtime.ingest(r).accepted
    ack = runtime.ingest(r)
    assert ack.duplicate and not ack.accepted
    logged = [rec for rec in runtime.log.records() if rec["type"] == "reading"]
    assert len(logged) == 1
    assert logged[0]["value"] == 80 and logged[0]["origin"] == "dev1"
    events = drain(sub)
    assert [e["event"] for e in events] == ["vitals"]


def test_patient_entry_is_stamped_now_from_the_control_center(make_runtime):
    clock = ManualClock(1_000)
    runtime = make_runtime(clock=clock)
    runtime.patient_entry(VitalKind.AGE, 34)
    result = runtime.store.latest(VitalKind.AGE, 1_000)
    assert result.reading.value == 34
    assert result.reading.timestamp == 1_000
    assert result.reading.origin == "control_center"
    # measured kinds must arrive through the device path instead
    with pytest.raises(SourceClassViolationError):
        runtime.patient_entry(VitalKind.WEIGHT, 80)


# -- automation --------------------------------------------------------------------


def test_accepted_reading_triggers_auto_decide(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    runtime.advance(session.id, "next")
    assert session.current == "glucose_check"
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))
    assert session.current == "give_glucose"
    kinds = [r["kind"] for r in runtime.log.records() if r["type"] == "audit"]
    assert kinds == ["manual_advance", "auto_advance"]


def test_advance_returns_the_post_automation_view(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))
    view = runtime.advance(session.id, "next")
    assert view.node_id == "give_glucose"


def chain_graph(edges_d2=("yes", "no")):
    payload = {
        "id": "chain",
        "title": "Chained decisions",
        "kind": "treatment_path",
        "entry": "prep",
        "nodes": [
            {"id": "prep", "kind": "action", "text": "prep"},
            {
                "id": "d1",
                "kind": "decision",
                "text": "glucose low?",
                "requirements": [{"kind": "blood_glucose", "min": 60, "purpose": "decision"}],
            },
            {
                "id": "d2",
                "kind": "decision",
                "text": "oxygen low?",
                "requirements": [{"kind": "spo2", "min": 90, "purpose": "decision"}],
            },
            {"id": "t1", "kind": "terminal", "text": "t1"},
            {"id": "t2", "kind": "terminal", "text": "t2"},
            {"id": "t3", "kind": "terminal", "text": "t3"},
        ],
        "edges": [
            {"from": "prep", "to": "d1", "label": "next"},
            {"from": "d1", "to": "d2", "label": "yes"},
            {"from": "d1", "to": "t1", "label": "no"},
            {"from": "d2", "to": "t2", "label": "yes"},
            {"from": "d2", "to": "t3", "label": "no"},
        ],
    }
    return parse_graph(json.dumps(payload))


def test_consecutive_clear_decisions_chain_in_one_command():
    runtime = Runtime({"chain": chain_graph()}, clock=ManualClock(0))
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))
    runtime.ingest(reading(VitalKind.SPO2, 70, 0))
    session = runtime.create_session("chain")
    view = runtime.advance(session.id, "next")
    # one manual step, two automated: d1 clears yes, d2 clears yes
    assert view.node_id == "t2"
    autos = [e for e in session.audit_log() if e.kind is AuditKind.AUTO_ADVANCE]
    assert [e.payload["from"] for e in autos] == ["d1", "d2"]
    runtime.close()


def cycle_graph():
    payload = {
        "id": "spin",
        "title": "Decision cycle",
        "kind": "treatment_path",
        "entry": "prep",
        "nodes": [
            {"id": "prep", "kind": "action", "text": "prep"},
            {
                "id": "d1",
                "kind": "decision",
                "text": "low?",
                "requirements": [{"kind": "blood_glucose", "min": 60, "purpose": "decision"}],
            },
            {
                "id": "d2",
                "kind": "decision",
                "text": "still low?",
                "requirements": [{"kind": "blood_glucose", "min": 60, "purpose": "decision"}],
            },
            {"id": "t1", "kind": "terminal", "text": "t1"},
            {"id": "t2", "kind": "terminal", "text": "t2"},
        ],
        "edges": [
            {"from": "prep", "to": "d1", "label": "next"},
            {"from": "d1", "to": "d2", "label": "yes"},
            {"from": "d1", "to": "t1", "label": "no"},
            {"from": "d2", "to": "d1", "label": "yes"},
            {"from": "d2", "to": "t2", "label": "no"},
        ],
    }
    return parse_graph(json.dumps(payload))


def test_decision_cycles_cannot_spin_automation_forever():
    runtime = Runtime({"spin": cycle_graph()}, clock=ManualClock(0))
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))
    session = runtime.create_session("spin")
    runtime.advance(session.id, "next")  # would loop d1 -> d2 -> d1 ... unbounded
    autos = [e for e in session.audit_log() if e.kind is AuditKind.AUTO_ADVANCE]
    assert len(autos) == len(session.graph.nodes)
    assert session.current in ("d1", "d2")
    runtime.close()


def test_undo_keeps_automation_quiet_until_a_new_reading(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))
    runtime.advance(session.id, "next")
    assert session.current == "give_glucose"
    view = runtime.undo(session.id)
    assert view.node_id == "glucose_check"
    assert session.current == "glucose_check"  # no auto re-fire on the spot
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))  # duplicate: still quiet
    assert session.current == "glucose_check"
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 39, 100))
    assert session.current == "give_glucose"


# -- alarms through the runtime --------------------------------------------------------


def test_alarm_context_is_the_latest_session(make_runtime):
    runtime = make_runtime()
    runtime.create_session("hypoglycemia")
    second = runtime.create_session("hypoglycemia")
    runtime.ingest(reading(VitalKind.SPO2, 80, 0))
    alarm = runtime.monitor.list_alarms()[0]
    assert alarm.session_id == second.id
    assert alarm.node_id == "assess"


def test_accepted_alarm_jumps_its_session_and_logs(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    sub = runtime.bus.subscribe()
    runtime.ingest(reading(VitalKind.SPO2, 80, 0))
    alarm = runtime.alarm_verdict("a1", VerdictDecision.ACCEPT_CHANGE)
    assert alarm.state.value == "accepted"
    assert session.graph.id == "airway_check"
    # jump lands on spo2_check; 80 clears min 90 by 10 > 9, so automation
    # immediately takes the yes branch
    moves = [e for e in session.audit_log() if e.kind in (AuditKind.MANUAL_ADVANCE, AuditKind.AUTO_ADVANCE)]
    assert [(e.kind.value, e.payload["to"]) for e in moves] == [
        ("manual_advance", "spo2_check"),
        ("auto_advance", "open_airway"),
    ]
    assert session.current == "open_airway"
    types = [r["type"] for r in runtime.log.records()]
    assert "alarm_raised" in types and "alarm_resolved" in types
    events = [e["event"] for e in drain(sub)]
    assert events[0] == "vitals"
    assert "alarm" in events and "alarm_resolved" in events and "view" in events


def test_alarm_events_precede_resolution_in_the_stream(make_runtime):
    runtime = make_runtime()
    runtime.create_session("hypoglycemia")
    sub = runtime.bus.subscribe()
    runtime.ingest(reading(VitalKind.SPO2, 80, 0))
    runtime.alarm_verdict("a1", VerdictDecision.DISMISS)
    events = drain(sub)
    seqs = [e["stream_seq"] for e in events]
    assert seqs == sorted(seqs)
    order = [e["event"] for e in events]
    assert order.index("alarm") < order.index("alarm_resolved")


# -- read side ---------------------------------------------------------------------


def test_vitals_snapshot_is_sorted_and_complete(make_runtime):
    clock = ManualClock(0)
    runtime = make_runtime(clock=clock)
    runtime.ingest(reading(VitalKind.SPO2, 97, 10))
    runtime.ingest(reading(VitalKind.HEART_FREQUENCY, 80, 20))
    clock.set(50)
    snapshot = runtime.vitals_snapshot()
    assert snapshot["now"] == 50
    assert list(snapshot["vitals"]) == ["heart_frequency", "spo2"]
    assert snapshot["vitals"]["spo2"] == {
        "value": 97,
        "timestamp": 10,
        "origin": "dev1",
        "unit": "%",
        "state": "fresh",
        "age_ms": 40,
    }


def test_export_requires_a_known_session(make_runtime):
    runtime = make_runtime()
    with pytest.raises(UnknownSessionError):
        runtime.export_session("s1")
    session = runtime.create_session("hypoglycemia")
    exported = runtime.export_session(session.id)
    assert [r["type"] for r in exported] == ["session_start"]


def test_live_state_matches_log_replay(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    runtime.ingest(reading(VitalKind.HEART_FREQUENCY, 82, 0))
    runtime.advance(session.id, "next")
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 10))
    runtime.ingest(reading(VitalKind.SPO2, 80, 20))  # raises a1
    runtime.alarm_verdict("a1", VerdictDecision.DISMISS)
    assert state_from_records(runtime.log.records()) == runtime.live_state()


# -- wire shapes --------------------------------------------------------------------


def test_view_payload_resolves_known_and_unknown(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    runtime.ingest(reading(VitalKind.HEART_FREQUENCY, 80, 0))
    payload = view_payload(runtime.view(session.id))
    assert payload["node_id"] == "assess"
    assert payload["choices"] == ["next"]
    by_kind = {entry["kind"]: entry for entry in payload["resolved"]}
    assert by_kind["heart_frequency"]["value"] == 80
    assert by_kind["heart_frequency"]["unit"] == "bpm"
    assert by_kind["heart_frequency"]["freshness"] == "fresh"
    assert by_kind["spo2"]["value"] is None
    assert by_kind["spo2"]["freshness"] == "unknown"


def test_view_payload_carries_dosage(make_runtime):
    runtime = make_runtime()
    session = runtime.create_session("hypoglycemia")
    runtime.ingest(reading(VitalKind.WEIGHT, 80, 0))
    runtime.ingest(reading(VitalKind.BLOOD_GLUCOSE, 40, 0))
    payload = view_payload(runtime.view(session.id))
    assert payload["node_id"] == "assess"
    runtime.advance(session.id, "next")
    payload = view_payload(runtime.view(session.id))
    assert payload["node_id"] == "give_glucose"
    assert payload["dosage"]["dose"] == 400.0
    assert payload["dosage"]["drug"]
    assert payload["dosage_error"] is None
