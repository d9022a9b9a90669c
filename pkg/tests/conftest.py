from __future__ import annotations

import json
from pathlib import Path

import pytest

from vitalpath.graph import TreatmentGraph, load_graph_dir
from vitalpath.runtime import ManualClock, Runtime
from vitalpath.store import VitalStore

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# filled by test_acceptance, printed by pytest_terminal_summary
acceptance_results: list[tuple[str, bool]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, ok in acceptance_results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}: {name}")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_graphs() -> dict[str, TreatmentGraph]:
    return load_graph_dir(FIXTURES / "graphs")


@pytest.fixture()
def hypoglycemia(fixture_graphs) -> TreatmentGraph:
    return fixture_graphs["hypoglycemia"]


@pytest.fixture()
def airway(fixture_graphs) -> TreatmentGraph:
    return fixture_graphs["airway_check"]


@pytest.fixture()
def store() -> VitalStore:
    return VitalStore()


@pytest.fixture()
def clock() -> ManualClock:
    return ManualClock(0)


@pytest.fixture()
def make_runtime(fixture_graphs, tmp_path):
    """Runtime factory on a manual clock with fixture graphs/rules/thresholds."""
    from vitalpath.alarms import load_thresholds
    from vitalpath.dosage import load_dosage_rules

    built: list[Runtime] = []

    def _make(*, thresholds=None, log=False, clock=None, **kwargs) -> Runtime:
        if thresholds is None:
            thresholds = load_thresholds(FIXTURES / "thresholds.json")
        runtime = Runtime(
            fixture_graphs,
            dosage_rules=load_dosage_rules(FIXTURES / "graphs" / "dosage_rules.json"),
            thresholds=thresholds,
            clock=clock if clock is not None else ManualClock(0),
            log_path=str(tmp_path / "session.jsonl") if log else None,
            **kwargs,
        )
        built.append(runtime)
        return runtime

    yield _make
    for runtime in built:
        runtime.close()


def load_fixture_json(name: str):
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))
