"""Catalog of vital-sign kinds.

Every kind the engine can handle is declared here once, with its canonical
unit, its source class (live device measurement vs. control-center database
entry), a broad physical plausibility range used to reject nonsense values at
ingest time, and an optional staleness-window override for slowly varying
entries. Graph documents never restate units; the catalog is the single
authority.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class SourceClass(Enum):
    """How a vital reaches the system."""

    MEASUREMENT = "measurement"
    DATABASE_ENTRY = "database_entry"


class VitalKind(str, Enum):
    AGE = "age"
    SYSTOLIC_BLOOD_PRESSURE = "systolic_blood_pressure"
    DIASTOLIC_BLOOD_PRESSURE = "diastolic_blood_pressure"
    BLOOD_PRESSURE_DIFFERENCE = "blood_pressure_difference"
    WEIGHT = "weight"
    SPO2 = "spo2"
    HEART_FREQUENCY = "heart_frequency"
    HEART_PULSE = "heart_pulse"
    BLOOD_GLUCOSE = "blood_glucose"
    PAIN_NRS = "pain_nrs"
    TEMPERATURE = "temperature"
    GCS = "gcs"
    ETCO2 = "etco2"
    TRANSPORT = "transport"
    CUFF_PRESSURE = "cuff_pressure"
    TIME_PASSED = "time_passed"
    RESPIRATORY_RATE = "respiratory_rate"
    BURN_PERCENTAGE = "burn_percentage"
    FALL_ALTITUDE = "fall_altitude"
    VOLTAGE_CLASS = "voltage_class"
    HYPOTHERMIA_GRADE = "hypothermia_grade"
    KRUPP_GRADE = "krupp_grade"
    QSOFA = "qsofa"


@dataclass(frozen=True)
class KindSpec:
    """Per-kind facts fixed at the catalog level.

    staleness_ms: None means "use the store default"; math.inf means the
    value never goes stale (age, weight).
    """

    unit: str
    source: SourceClass
    physical_min: float
    physical_max: float
    staleness_ms: float | None = None


_M = SourceClass.MEASUREMENT
_D = SourceClass.DATABASE_ENTRY

CATALOG: dict[VitalKind, KindSpec] = {
    VitalKind.AGE: KindSpec("years", _D, 0.0, 130.0, staleness_ms=math.inf),
    VitalKind.SYSTOLIC_BLOOD_PRESSURE: KindSpec("mmHg", _M, 0.0, 400.0),
    VitalKind.DIASTOLIC_BLOOD_PRESSURE: KindSpec("mmHg", _M, 0.0, 400.0),
    VitalKind.BLOOD_PRESSURE_DIFFERENCE: KindSpec("mmHg", _M, 0.0, 400.0),
    VitalKind.WEIGHT: KindSpec("kg", _M, 0.0, 700.0, staleness_ms=math.inf),
    VitalKind.SPO2: KindSpec("%", _M, 0.0, 100.0),
    VitalKind.HEART_FREQUENCY: KindSpec("bpm", _M, 0.0, 350.0),
    VitalKind.HEART_PULSE: KindSpec("bpm", _M, 0.0, 350.0),
    VitalKind.BLOOD_GLUCOSE: KindSpec("mg/dL", _M, 0.0, 2000.0),
    VitalKind.PAIN_NRS: KindSpec("score", _D, 0.0, 10.0),
    VitalKind.TEMPERATURE: KindSpec("°C", _M, 5.0, 45.0),
    VitalKind.GCS: KindSpec("score", _D, 3.0, 15.0),
    VitalKind.ETCO2: KindSpec("mmHg", _D, 0.0, 150.0),
    VitalKind.TRANSPORT: KindSpec("code", _D, 0.0, 100.0),
    VitalKind.CUFF_PRESSURE: KindSpec("mmHg", _D, 0.0, 300.0),
    VitalKind.TIME_PASSED: KindSpec("min", _D, 0.0, 100000.0),
    VitalKind.RESPIRATORY_RATE: KindSpec("/min", _M, 0.0, 120.0),
    VitalKind.BURN_PERCENTAGE: KindSpec("%", _D, 0.0, 100.0),
    VitalKind.FALL_ALTITUDE: KindSpec("m", _D, 0.0, 10000.0),
    VitalKind.VOLTAGE_CLASS: KindSpec("class", _D, 0.0, 1.0),
    VitalKind.HYPOTHERMIA_GRADE: KindSpec("grade", _D, 1.0, 4.0),
    VitalKind.KRUPP_GRADE: KindSpec("grade", _D, 1.0, 4.0),
    VitalKind.QSOFA: KindSpec("score", _D, 0.0, 3.0),
}


class UnknownVitalKindError(ValueError):
    """A kind name that is not in the catalog."""

    def __init__(self, name: str):
        super().__init__(f"unknown vital kind: {name!r}")
        self.name = name


def parse_kind(name: str) -> VitalKind:
    try:
        return VitalKind(name)
    except ValueError:
        raise UnknownVitalKindError(name) from None


def canonical_unit(kind: VitalKind) -> str:
    return CATALOG[kind].unit


def source_class(kind: VitalKind) -> SourceClass:
    return CATALOG[kind].source


def physical_range(kind: VitalKind) -> tuple[float, float]:
    spec = CATALOG[kind]
    return spec.physical_min, spec.physical_max


def in_physical_range(kind: VitalKind, value: float) -> bool:
    lo, hi = physical_range(kind)
    return math.isfinite(value) and lo <= value <= hi


def measurement_kinds() -> tuple[VitalKind, ...]:
    return tuple(k for k, s in CATALOG.items() if s.source is _M)


def database_entry_kinds() -> tuple[VitalKind, ...]:
    return tuple(k for k, s in CATALOG.items() if s.source is _D)
