"""Latest-value store for measurements and control-center database entries.

This is the middleware's patient record for one session: an append-only
history per vital kind plus a latest-reading map, with timestamps on every
value and staleness classification relative to a caller-supplied "now".
Timestamps are milliseconds since the session epoch (monotonic, not
wall-clock), so replays are deterministic.

One lock guards all state: writers never lose updates, readers always see a
consistent latest map. Out-of-order readings are kept in history but never
regress the latest pointer.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple

from .vitals import CATALOG, SourceClass, VitalKind, canonical_unit, physical_range

DEFAULT_STALENESS_MS = 300_000.0


class UnitMismatchError(Exception):
    """Value outside the physically representable range for its kind."""

    def __init__(self, kind: VitalKind, value: float):
        lo, hi = physical_range(kind)
        super().__init__(
            f"{kind.value} value {value!r} outside physical range "
            f"[{lo}, {hi}] {canonical_unit(kind)}"
        )
        self.kind = kind
        self.value = value


class SourceClassViolationError(Exception):
    """A measurement kind pushed through the database-entry path."""

    def __init__(self, kind: VitalKind):
        super().__init__(f"{kind.value} is a {CATALOG[kind].source.value}, not a database entry")
        self.kind = kind


class FreshState(str, Enum):
    FRESH = "fresh"
    STALE = "stale"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Freshness:
    state: FreshState
    age_ms: int | None = None

    @classmethod
    def fresh(cls, age_ms: int) -> "Freshness":
        return cls(FreshState.FRESH, age_ms)

    @classmethod
    def stale(cls, age_ms: int) -> "Freshness":
        return cls(FreshState.STALE, age_ms)

    @classmethod
    def unknown(cls) -> "Freshness":
        return cls(FreshState.UNKNOWN, None)

    @property
    def is_fresh(self) -> bool:
        return self.state is FreshState.FRESH

    @property
    def is_unknown(self) -> bool:
        return self.state is FreshState.UNKNOWN


CONTROL_CENTER_ORIGIN = "control_center"


@dataclass(frozen=True)
class VitalReading:
    """One timestamped value in the kind's canonical unit."""

    kind: VitalKind
    value: float
    timestamp: int
    origin: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.kind.value}: value must be finite, got {self.value!r}")
        if self.timestamp < 0:
            raise ValueError(f"{self.kind.value}: timestamp must be >= 0, got {self.timestamp}")

    def identity(self) -> tuple[str, float, int, str]:
        return (self.kind.value, self.value, self.timestamp, self.origin)


@dataclass(frozen=True)
class IngestAck:
    accepted: bool
    duplicate: bool
    latest_updated: bool


class LatestResult(NamedTuple):
    reading: VitalReading | None
    freshness: Freshness


class VitalStore:
    """Per-session patient record: latest map plus append-only history."""

    def __init__(
        self,
        default_staleness_ms: float = DEFAULT_STALENESS_MS,
        staleness_overrides: Mapping[VitalKind, float] | None = None,
    ):
        self._default_staleness_ms = float(default_staleness_ms)
        windows: dict[VitalKind, float] = {}
        for kind, spec in CATALOG.items():
            if spec.staleness_ms is not None:
                windows[kind] = spec.staleness_ms
        if staleness_overrides:
            windows.update(staleness_overrides)
        self._windows = windows
        self._history: dict[VitalKind, list[VitalReading]] = {}
        self._latest: dict[VitalKind, VitalReading] = {}
        self._seen: dict[VitalKind, set[tuple]] = {}
        self._lock = threading.Lock()

    def staleness_window_ms(self, kind: VitalKind) -> float:
        return self._windows.get(kind, self._default_staleness_ms)

    def ingest_reading(self, reading: VitalReading) -> IngestAck:
        """Append to history; move the latest pointer only forward in time.

        Exact duplicates (same kind, value, timestamp, origin) are not
        re-accepted, so ingestion is idempotent. Values outside the kind's
        physical range raise UnitMismatchError.
        """
        lo, hi = physical_range(reading.kind)
        if not (lo <= reading.value <= hi):
            raise UnitMismatchError(reading.kind, reading.value)
        with self._lock:
            seen = self._seen.setdefault(reading.kind, set())
            key = reading.identity()
            if key in seen:
                return IngestAck(accepted=False, duplicate=True, latest_updated=False)
            seen.add(key)
            self._history.setdefault(reading.kind, []).append(reading)
            current = self._latest.get(reading.kind)
            updated = current is None or reading.timestamp >= current.timestamp
            if updated:
                self._latest[reading.kind] = reading
            return IngestAck(accepted=True, duplicate=False, latest_updated=updated)

    def set_database_entry(self, kind: VitalKind, value: float, timestamp: int) -> IngestAck:
        """Store a control-center entry; only database-entry kinds allowed."""
        if CATALOG[kind].source is not SourceClass.DATABASE_ENTRY:
            raise SourceClassViolationError(kind)
        return self.ingest_reading(
            VitalReading(kind=kind, value=float(value), timestamp=timestamp, origin=CONTROL_CENTER_ORIGIN)
        )

    def _freshness_for(self, reading: VitalReading, now: int) -> Freshness:
        age = now - reading.timestamp
        if age <= self.staleness_window_ms(reading.kind):
            return Freshness.fresh(age)
        return Freshness.stale(age)

    def latest(self, kind: VitalKind, now: int) -> LatestResult:
        """Max-timestamp reading for kind plus its freshness under `now`."""
        with self._lock:
            reading = self._latest.get(kind)
        if reading is None:
            return LatestResult(None, Freshness.unknown())
        return LatestResult(reading, self._freshness_for(reading, now))

    def snapshot_all(self, now: int) -> dict[VitalKind, LatestResult]:
        """Consistent point-in-time copy of the latest map with freshness."""
        with self._lock:
            latest = dict(self._latest)
        return {
            kind: LatestResult(reading, self._freshness_for(reading, now))
            for kind, reading in latest.items()
        }

    def history(self, kind: VitalKind) -> tuple[VitalReading, ...]:
        with self._lock:
            return tuple(self._history.get(kind, ()))

    def kinds(self) -> tuple[VitalKind, ...]:
        with self._lock:
            return tuple(self._history.keys())
