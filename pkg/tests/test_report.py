"""Report files: delimited data plus rendered figures, byte-stable CSVs."""
from __future__ import annotations

import csv

from vitalpath.report import write_replay_report, write_stats_report
from vitalpath.sessionlog import READING, SessionLog
from vitalpath.stats import vital_occurrence_stats
from vitalpath.vitals import CATALOG


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def test_stats_report_writes_csv_and_png(fixture_graphs, tmp_path):
    stats = vital_occurrence_stats(fixture_graphs.values())
    paths = write_stats_report(stats, tmp_path / "out")
    assert [p.name for p in paths] == ["occurrences.csv", "occurrences.png"]
    assert all(p.stat().st_size > 0 for p in paths)
    rows = read_rows(paths[0])
    assert rows[0] == ["kind", "unit", "count"]
    assert len(rows) == 1 + len(CATALOG)  # zero counts included
    # sorted by count descending, then name
    assert rows[1] == ["blood_glucose", "mg/dL", "2"]
    assert rows[2] == ["spo2", "%", "2"]
    counts = [int(r[2]) for r in rows[1:]]
    assert counts == sorted(counts, reverse=True)


def test_stats_report_is_byte_stable(fixture_graphs, tmp_path):
    stats = vital_occurrence_stats(fixture_graphs.values())
    first = write_stats_report(stats, tmp_path / "a")[0].read_bytes()
    second = write_stats_report(stats, tmp_path / "b")[0].read_bytes()
    assert first == second


def test_stats_report_handles_empty_corpus(tmp_path):
    stats = vital_occurrence_stats([])
    paths = write_stats_report(stats, tmp_path)
    assert all(p.stat().st_size > 0 for p in paths)


def sample_log():
    log = SessionLog()
    log.append(READING, 10, kind="spo2", value=97, timestamp=10, origin="dev1")
    log.append(READING, 20, kind="heart_frequency", value=80, timestamp=20, origin="dev1")
    log.append(READING, 30, kind="spo2", value=95, timestamp=30, origin="dev1")
    log.append("audit", 40, session_id="s1", kind="manual_advance", node_id="e", payload={})
    return log


def test_replay_report_writes_readings_and_timeline(tmp_path):
    log = sample_log()
    paths = write_replay_report(log.records(), tmp_path)
    assert [p.name for p in paths] == ["readings.csv", "vitals.png"]
    rows = read_rows(paths[0])
    assert rows[0] == ["seq", "ingested_at", "kind", "value", "timestamp", "origin"]
    # only reading records land in the CSV, audit rows do not
    assert len(rows) == 4
    assert rows[1] == ["1", "10", "spo2", "97", "10", "dev1"]
    assert paths[1].stat().st_size > 0


def test_replay_report_is_byte_stable(tmp_path):
    log = sample_log()
    first = write_replay_report(log.records(), tmp_path / "a")[0].read_bytes()
    second = write_replay_report(log.records(), tmp_path / "b")[0].read_bytes()
    assert first == second


def test_replay_report_without_readings(tmp_path):
    paths = write_replay_report([], tmp_path)
    assert read_rows(paths[0]) == [["seq", "ingested_at", "kind", "value", "timestamp", "origin"]]
    assert paths[1].stat().st_size > 0
