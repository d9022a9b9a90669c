"""Weight- and age-driven medication dose computation.

A rule is a small table: one or more branches gated by patient age
(age_min inclusive, age_max exclusive), each giving either a per-kg rate or
a fixed dose, plus a rounding increment. Doses are rounded half-up to the
increment using decimal arithmetic so identical inputs always produce the
identical dose.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Mapping

from .store import VitalStore
from .vitals import VitalKind


class MissingDependencyError(Exception):
    """A vital the rule needs has no reading in the store."""

    def __init__(self, kind: VitalKind):
        super().__init__(f"no reading for required input {kind.value}")
        self.kind = kind


class DosageError(Exception):
    """Rule table problem: no branch matches, or the dose rounds to zero."""


@dataclass(frozen=True)
class DosageBranch:
    per_kg_rate: float | None = None
    fixed_dose: float | None = None
    age_min: float | None = None
    age_max: float | None = None
    label: str = "default"

    def __post_init__(self):
        if (self.per_kg_rate is None) == (self.fixed_dose is None):
            raise ValueError(f"branch {self.label!r}: exactly one of per_kg_rate/fixed_dose")
        if self.age_min is not None and self.age_max is not None and self.age_min >= self.age_max:
            raise ValueError(f"branch {self.label!r}: empty age window")

    @property
    def age_gated(self) -> bool:
        return self.age_min is not None or self.age_max is not None

    def accepts_age(self, age: float) -> bool:
        if self.age_min is not None and age < self.age_min:
            return False
        if self.age_max is not None and age >= self.age_max:
            return False
        return True


@dataclass(frozen=True)
class DosageRule:
    id: str
    drug: str
    branches: tuple[DosageBranch, ...]
    unit: str = "mg"
    rounding_increment: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise ValueError(f"rule {self.id!r}: needs at least one branch")
        if self.rounding_increment <= 0:
            raise ValueError(f"rule {self.id!r}: rounding increment must be positive")

    @property
    def age_gated(self) -> bool:
        return any(branch.age_gated for branch in self.branches)


@dataclass(frozen=True)
class DosageResult:
    rule_id: str
    drug: str
    dose: float
    unit: str
    branch_label: str
    inputs: Mapping[str, Mapping[str, Any]]


def round_to_increment(value: float, increment: float) -> float:
    """Round half-up to a multiple of increment, exactly in decimal."""
    quotient = Decimal(repr(value)) / Decimal(repr(increment))
    steps = quotient.quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return float(steps * Decimal(repr(increment)))


def compute_dosage(rule: DosageRule, store: VitalStore, now: int) -> DosageResult:
    """Evaluate a rule against the store's latest weight/age.

    Raises MissingDependencyError when a required input has no reading and
    DosageError when no branch matches the age or the dose rounds to <= 0.
    """
    inputs: dict[str, dict[str, Any]] = {}
    if rule.age_gated:
        age_reading, _ = store.latest(VitalKind.AGE, now)
        if age_reading is None:
            raise MissingDependencyError(VitalKind.AGE)
        inputs["age"] = {
            "value": age_reading.value,
            "timestamp": age_reading.timestamp,
            "origin": age_reading.origin,
        }
        branch = next((b for b in rule.branches if b.accepts_age(age_reading.value)), None)
        if branch is None:
            raise DosageError(f"rule {rule.id!r}: no branch covers age {age_reading.value}")
    else:
        branch = rule.branches[0]

    if branch.per_kg_rate is not None:
        weight_reading, _ = store.latest(VitalKind.WEIGHT, now)
        if weight_reading is None:
            raise MissingDependencyError(VitalKind.WEIGHT)
        inputs["weight"] = {
            "value": weight_reading.value,
            "timestamp": weight_reading.timestamp,
            "origin": weight_reading.origin,
        }
        raw = float(Decimal(repr(branch.per_kg_rate)) * Decimal(repr(weight_reading.value)))
    else:
        raw = float(branch.fixed_dose)  # type: ignore[arg-type]

    dose = round_to_increment(raw, rule.rounding_increment)
    if dose <= 0:
        raise DosageError(f"rule {rule.id!r}: dose rounds to {dose}, must be > 0")
    return DosageResult(
        rule_id=rule.id,
        drug=rule.drug,
        dose=dose,
        unit=rule.unit,
        branch_label=branch.label,
        inputs=inputs,
    )


# --- rules file -------------------------------------------------------------

def _parse_branch(data: Mapping[str, Any], where: str) -> DosageBranch:
    allowed = {"per_kg_rate", "fixed_dose", "age_min", "age_max", "label"}
    extra = set(data) - allowed
    if extra:
        raise ValueError(f"{where}: unknown field(s) {sorted(extra)}")
    try:
        return DosageBranch(
            per_kg_rate=data.get("per_kg_rate"),
            fixed_dose=data.get("fixed_dose"),
            age_min=data.get("age_min"),
            age_max=data.get("age_max"),
            label=data.get("label", "default"),
        )
    except ValueError as exc:
        raise ValueError(f"{where}: {exc}") from None


def parse_dosage_rules(data: Any) -> dict[str, DosageRule]:
    """Parse a rules document: JSON array of rule objects.

    A rule is either flat ({id, drug, per_kg_rate|fixed_dose, ...}) or
    branched ({id, drug, branches: [...], ...}).
    """
    if not isinstance(data, list):
        raise ValueError("dosage rules document must be a JSON array")
    common = {"id", "drug", "unit", "rounding_increment"}
    rules: dict[str, DosageRule] = {}
    for i, raw in enumerate(data):
        where = f"rule[{i}]"
        if not isinstance(raw, dict):
            raise ValueError(f"{where}: must be an object")
        rule_id = raw.get("id")
        drug = raw.get("drug")
        if not isinstance(rule_id, str) or not isinstance(drug, str):
            raise ValueError(f"{where}: id and drug are required strings")
        unit = raw.get("unit", "mg")
        increment = raw.get("rounding_increment", 1.0)
        if "branches" in raw:
            extra = set(raw) - common - {"branches"}
            if extra:
                raise ValueError(f"{where}: unknown field(s) {sorted(extra)}")
            branches = tuple(
                _parse_branch(b, f"{where}.branches[{j}]") for j, b in enumerate(raw["branches"])
            )
        else:
            extra = set(raw) - common - {"per_kg_rate", "fixed_dose"}
            if extra:
                raise ValueError(f"{where}: unknown field(s) {sorted(extra)}")
            branches = (
                _parse_branch(
                    {k: v for k, v in raw.items() if k in ("per_kg_rate", "fixed_dose")},
                    where,
                ),
            )
        if rule_id in rules:
            raise ValueError(f"{where}: duplicate rule id {rule_id!r}")
        rules[rule_id] = DosageRule(
            id=rule_id, drug=drug, branches=branches, unit=unit, rounding_increment=increment
        )
    return rules


def load_dosage_rules(path: str | Path) -> dict[str, DosageRule]:
    return parse_dosage_rules(json.loads(Path(path).read_text(encoding="utf-8")))
