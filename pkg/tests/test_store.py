"""Latest-value semantics, idempotent ingestion, and freshness windows."""
from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalpath.store import (
    CONTROL_CENTER_ORIGIN,
    DEFAULT_STALENESS_MS,
    FreshState,
    SourceClassViolationError,
    UnitMismatchError,
    VitalReading,
    VitalStore,
)
from vitalpath.vitals import VitalKind

from .oracles import oracle_latest


def reading(kind=VitalKind.SPO2, value=97.0, t=1000, origin="dev-1"):
    return VitalReading(kind=kind, value=value, timestamp=t, origin=origin)


def test_empty_store_is_unknown(store):
    result, freshness = store.latest(VitalKind.SPO2, now=5000)
    assert result is None
    assert freshness.state is FreshState.UNKNOWN
    assert freshness.is_unknown


def test_ingest_then_latest_is_bit_exact(store):
    r = reading(value=97.3, t=1234)
    ack = store.ingest_reading(r)
    assert ack.accepted and ack.latest_updated and not ack.duplicate
    got, freshness = store.latest(VitalKind.SPO2, now=1234)
    assert got is r
    assert got.value == 97.3
    assert got.timestamp == 1234
    assert freshness.is_fresh
    assert freshness.age_ms == 0


def test_latest_pointer_only_moves_forward_in_time(store):
    store.ingest_reading(reading(value=95, t=2000))
    store.ingest_reading(reading(value=90, t=1000))  # older, keeps history only
    got, _ = store.latest(VitalKind.SPO2, now=3000)
    assert got.value == 95
    assert len(store.history(VitalKind.SPO2)) == 2


def test_equal_timestamp_later_ingest_wins(store):
    store.ingest_reading(reading(value=95, t=2000, origin="dev-1"))
    store.ingest_reading(reading(value=96, t=2000, origin="dev-2"))
    got, _ = store.latest(VitalKind.SPO2, now=2500)
    assert got.value == 96


def test_exact_duplicate_not_reaccepted(store):
    assert store.ingest_reading(reading()).accepted
    ack = store.ingest_reading(reading())
    assert ack.duplicate and not ack.accepted and not ack.latest_updated
    assert len(store.history(VitalKind.SPO2)) == 1


def test_freshness_boundary_is_inclusive(store):
    store.ingest_reading(reading(t=0))
    _, fresh = store.latest(VitalKind.SPO2, now=int(DEFAULT_STALENESS_MS))
    assert fresh.state is FreshState.FRESH  # age == window still counts
    _, stale = store.latest(VitalKind.SPO2, now=int(DEFAULT_STALENESS_MS) + 1)
    assert stale.state is FreshState.STALE
    assert stale.age_ms == DEFAULT_STALENESS_MS + 1


def test_age_and_weight_never_go_stale(store):
    store.set_database_entry(VitalKind.AGE, 54, timestamp=0)
    store.ingest_reading(reading(kind=VitalKind.WEIGHT, value=80, t=0, origin="scale-1"))
    year_later = 365 * 24 * 3600 * 1000
    _, age_fresh = store.latest(VitalKind.AGE, now=year_later)
    _, weight_fresh = store.latest(VitalKind.WEIGHT, now=year_later)
    assert age_fresh.is_fresh
    assert weight_fresh.is_fresh


def test_staleness_override_per_kind():
    store = VitalStore(staleness_overrides={VitalKind.SPO2: 1000})
    store.ingest_reading(reading(t=0))
    _, f = store.latest(VitalKind.SPO2, now=1001)
    assert f.state is FreshState.STALE


def test_out_of_physical_range_raises_unit_mismatch(store):
    with pytest.raises(UnitMismatchError):
        store.ingest_reading(reading(value=130.0))  # spo2 is a percentage
    assert store.history(VitalKind.SPO2) == ()


def test_database_entry_source_class_enforced(store):
    with pytest.raises(SourceClassViolationError):
        store.set_database_entry(VitalKind.SPO2, 95, timestamp=0)
    ack = store.set_database_entry(VitalKind.GCS, 14, timestamp=10)
    assert ack.accepted
    got, _ = store.latest(VitalKind.GCS, now=10)
    assert got.origin == CONTROL_CENTER_ORIGIN


def test_reading_validation():
    with pytest.raises(ValueError):
        VitalReading(VitalKind.SPO2, float("nan"), 0, "d")
    with pytest.raises(ValueError):
        VitalReading(VitalKind.SPO2, 95.0, -1, "d")


def test_snapshot_is_a_point_in_time_copy(store):
    store.ingest_reading(reading(value=95, t=100))
    snap = store.snapshot_all(now=200)
    store.ingest_reading(reading(value=80, t=300))
    assert snap[VitalKind.SPO2].reading.value == 95


_reading_tuples = st.lists(
    st.tuples(
        st.sampled_from(["spo2", "heart_frequency", "blood_glucose"]),
        st.integers(min_value=0, max_value=100).map(float),
        st.integers(min_value=0, max_value=10_000),
        st.sampled_from(["dev-1", "dev-2"]),
    ),
    max_size=60,
)


@settings(max_examples=150, deadline=None)
@given(_reading_tuples)
def test_fold_matches_oracle(tuples):
    """Store latest map == independent fold, and history counts accepted
    ingests exactly, for arbitrary interleavings with duplicates."""
    store = VitalStore()
    accepted = 0
    for kind_name, value, t, origin in tuples:
        ack = store.ingest_reading(
            VitalReading(VitalKind(kind_name), value, t, origin)
        )
        if ack.accepted:
            accepted += 1
    expected = oracle_latest(tuples)
    snapshot = store.snapshot_all(now=0)
    mine = {
        kind.value: (res.reading.value, res.reading.timestamp, res.reading.origin)
        for kind, res in snapshot.items()
    }
    assert mine == expected
    assert sum(len(store.history(k)) for k in store.kinds()) == accepted
