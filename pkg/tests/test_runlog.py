"""Tests for the JSONL run log (runlog.py)."""

from __future__ import annotations

import io
import json
import threading
from pathlib import Path

import pytest

from gridwave.runlog import RunLogger, RunRecord, build_record, iter_records, summarize


def _record(command: str = "iso search", exit_code: int = 0, latency_ms: float = 10.0,
            status: str = "ok") -> RunRecord:
    return build_record(command, {"budget": 100}, seed=3, status=status,
                        exit_code=exit_code, latency_ms=latency_ms,
                        summary={"best_ratio": 0.41}, artifacts=[Path("out/iso.json")])


class TestRunLogger:
    def test_requires_path_or_stream(self) -> None:
        with pytest.raises(ValueError, match="path or a stream"):
            RunLogger()

    def test_writes_jsonl_to_path(self, tmp_path: Path) -> None:
        log = tmp_path / "runs.jsonl"
        RunLogger(log).log(_record())

        lines = log.read_text().strip().splitlines()
        assert len(lines) == 1
        data = json.loads(lines[0])
        assert data["command"] == "iso search"
        assert data["seed"] == 3
        assert data["artifacts"] == [str(Path("out/iso.json"))]

    def test_creates_parent_directories(self, tmp_path: Path) -> None:
        log = tmp_path / "nested" / "dir" / "runs.jsonl"
        RunLogger(log).log(_record())
        assert log.exists()

    def test_writes_to_stream(self) -> None:
        stream = io.StringIO()
        RunLogger(stream=stream).log(_record(status="invalid", exit_code=2))
        data = json.loads(stream.getvalue().strip())
        assert data["status"] == "invalid"
        assert data["exit_code"] == 2

    def test_thread_safety(self, tmp_path: Path) -> None:
        log = tmp_path / "runs.jsonl"
        logger = RunLogger(log)

        def worker() -> None:
            for _ in range(20):
                logger.log(_record())

        threads = [threading.Thread(target=worker) for _ in range(5)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        lines = log.read_text().strip().splitlines()
        assert len(lines) == 100
        for line in lines:
            json.loads(line)


class TestRecords:
    def test_latency_is_rounded(self) -> None:
        assert _record(latency_ms=1.23456789).latency_ms == 1.235

    def test_round_trip(self, tmp_path: Path) -> None:
        log = tmp_path / "runs.jsonl"
        RunLogger(log).log(_record())
        record = next(iter_records(log))
        assert RunRecord.from_dict(record.to_dict()) == record

    def test_from_dict_defaults(self) -> None:
        record = RunRecord.from_dict({})
        assert record.command == "unknown"
        assert record.seed is None
        assert record.exit_code == 0


class TestIterRecords:
    def test_missing_file_raises(self, tmp_path: Path) -> None:
        with pytest.raises(FileNotFoundError, match="not found"):
            list(iter_records(tmp_path / "missing.jsonl"))

    def test_skips_blank_and_malformed_lines(self, tmp_path: Path) -> None:
        log = tmp_path / "runs.jsonl"
        good = json.dumps(_record().to_dict())
        log.write_text(good + "\n\n{not json\n[1, 2]\n" + good + "\n")
        records = list(iter_records(log))
        assert len(records) == 2
        assert all(r.command == "iso search" for r in records)


class TestSummarize:
    def test_empty(self) -> None:
        stats = summarize([])
        assert stats["total_runs"] == 0
        assert stats["avg_latency_ms"] == 0.0

    def test_aggregates(self, tmp_path: Path) -> None:
        log = tmp_path / "runs.jsonl"
        logger = RunLogger(log)
        logger.log(_record("iso search", latency_ms=10.0))
        logger.log(_record("iso search", latency_ms=30.0))
        logger.log(_record("nls solve", exit_code=3, status="not_converged", latency_ms=50.0))

        stats = summarize(iter_records(log))
        assert stats["total_runs"] == 3
        assert stats["failed"] == 1
        assert stats["by_command"] == {"iso search": 2, "nls solve": 1}
        assert stats["by_status"] == {"ok": 2, "not_converged": 1}
        assert stats["avg_latency_ms"] == 30.0
        assert stats["max_latency_ms"] == 50.0
