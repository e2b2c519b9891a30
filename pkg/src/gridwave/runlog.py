"""Structured JSONL run log for CLI invocations.

Pass ``--run-log PATH`` to the ``gridwave`` command and every subcommand
appends one JSON line describing the run: the command, its configuration
and seed, the outcome, the exit code, a short numeric summary and the
artifacts written. Fields are never stored, only their summaries.

Example::

    from gridwave.runlog import RunLogger, build_record

    log = RunLogger("out/runs.jsonl")
    log.log(build_record("nls solve", {"p": 2.5, "mu": 1.0}, seed=0,
                         status="ok", exit_code=0, latency_ms=812.4,
                         summary={"energy": -0.0123}))

Analyze a log offline with :func:`iter_records` and :func:`summarize`,
or from the terminal with ``gridwave runs out/runs.jsonl``.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any, Iterable, Iterator


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunRecord:
    """One CLI run, as written to the JSONL run log.

    Attributes:
        timestamp: ISO 8601 UTC time the run finished.
        command: Subcommand path, e.g. ``"iso search"``.
        config: Parameters the run was invoked with.
        seed: Seed used, if the command is seeded.
        status: ``ok``, ``invalid`` or ``not_converged``.
        exit_code: Process exit code.
        latency_ms: Wall time in milliseconds.
        summary: Headline numbers of the run.
        artifacts: Paths of files written.
    """

    timestamp: str
    command: str
    config: dict[str, Any]
    seed: int | None
    status: str
    exit_code: int
    latency_ms: float
    summary: dict[str, Any] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunRecord":
        """Reconstruct a record from a parsed JSON object."""
        seed = data.get("seed")
        return cls(
            timestamp=data.get("timestamp", ""),
            command=data.get("command", "unknown"),
            config=dict(data.get("config", {})),
            seed=int(seed) if seed is not None else None,
            status=data.get("status", "ok"),
            exit_code=int(data.get("exit_code", 0)),
            latency_ms=float(data.get("latency_ms", 0.0)),
            summary=dict(data.get("summary", {})),
            artifacts=list(data.get("artifacts", [])),
        )


def build_record(
    command: str,
    config: dict[str, Any],
    seed: int | None,
    status: str,
    exit_code: int,
    latency_ms: float,
    summary: dict[str, Any] | None = None,
    artifacts: Iterable[str] = (),
) -> RunRecord:
    """Build a :class:`RunRecord` stamped with the current time."""
    return RunRecord(
        timestamp=_now_iso(),
        command=command,
        config=config,
        seed=seed,
        status=status,
        exit_code=exit_code,
        latency_ms=round(latency_ms, 3),
        summary=summary or {},
        artifacts=[str(a) for a in artifacts],
    )


class RunLogger:
    """Thread-safe JSONL sink for run records.

    Args:
        path: JSONL file to append to; parents are created on first write.
        stream: Alternatively an open text stream (takes precedence over *path*).
    """

    def __init__(self, path: str | Path | None = None, stream: IO[str] | None = None) -> None:
        if path is None and stream is None:
            raise ValueError("RunLogger requires a path or a stream.")
        self.path = Path(path) if path is not None else None
        self._stream = stream
        self._lock = threading.Lock()

    def log(self, record: RunRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False, default=str)
        with self._lock:
            if self._stream is not None:
                self._stream.write(line + "\n")
                self._stream.flush()
            else:
                assert self.path is not None
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")


def iter_records(path: str | Path) -> Iterator[RunRecord]:
    """Yield records from a run log, skipping blank and malformed lines."""
    log_path = Path(path)
    if not log_path.exists():
        raise FileNotFoundError(f"Run log '{log_path}' not found")
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(data, dict):
                yield RunRecord.from_dict(data)


def summarize(records: Iterable[RunRecord]) -> dict[str, Any]:
    """Aggregate runs by command and status, with latency statistics."""
    total = 0
    failed = 0
    by_command: dict[str, int] = {}
    by_status: dict[str, int] = {}
    latency_sum = 0.0
    latency_max = 0.0

    for record in records:
        total += 1
        failed += 1 if record.exit_code != 0 else 0
        by_command[record.command] = by_command.get(record.command, 0) + 1
        by_status[record.status] = by_status.get(record.status, 0) + 1
        latency_sum += record.latency_ms
        latency_max = max(latency_max, record.latency_ms)

    return {
        "total_runs": total,
        "failed": failed,
        "by_command": by_command,
        "by_status": by_status,
        "avg_latency_ms": round(latency_sum / total, 3) if total else 0.0,
        "max_latency_ms": round(latency_max, 3),
    }
