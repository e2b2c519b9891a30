"""JSON and CSV artifacts written by the CLI.

JSON payloads carry ``"schema": "gridwave/1"``, sorted keys and floats in
``repr`` form, so the same run always produces the same bytes and every
number reads back exactly. Non-finite floats are written as ``null``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

SCHEMA = "gridwave/1"
DEFAULT_OUT = Path("out")


def _clean(value: Any) -> Any:
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _clean(value.item())
    return value


def dumps(payload: Mapping[str, Any]) -> str:
    """Serialize *payload* with the schema tag, deterministically."""
    data = dict(_clean(payload))
    data["schema"] = SCHEMA
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | Path, payload: Mapping[str, Any]) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(payload), encoding="utf-8")
    return out


def read_json(path: str | Path) -> dict[str, Any]:
    """Load a JSON artifact.

    Raises:
        ValueError: If the file carries a schema other than ``gridwave/1``.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path} does not hold a JSON object")
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ValueError(f"{path} has schema {schema!r}, expected {SCHEMA!r}")
    return data


def write_csv(path: str | Path, header: Sequence[str],
              rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write *rows* under a fixed *header*; missing cells stay empty."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(header), extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return out
