"""Report emission: CSV and JSON-lines with deterministic formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import IO

FLOAT_DIGITS = 17


def _format_csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{FLOAT_DIGITS}g}"
    return str(value)


def _check_records(records: list[dict]) -> list[str]:
    if not records:
        raise ValueError("cannot emit an empty record list")
    keys = list(records[0])
    for i, record in enumerate(records):
        if list(record) != keys:
            raise ValueError(f"record {i} does not match the column set of record 0")
    return keys


def _write_csv(records: list[dict], stream: IO[str]) -> None:
    keys = _check_records(records)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(keys)
    for record in records:
        writer.writerow(_format_csv_value(record[k]) for k in keys)


def _write_jsonl(records: list[dict], stream: IO[str]) -> None:
    _check_records(records)
    for record in records:
        stream.write(json.dumps(record, allow_nan=True) + "\n")


def emit(records: list[dict], fmt: str, destination: str | Path | IO[str]) -> None:
    """Write records to a path or text stream as CSV or JSON-lines.

    CSV output carries a header row and prints floats with 17 significant
    digits, so values round-trip exactly; JSON-lines rows share one key set
    and parse back to the original records.
    """
    if fmt == "csv":
        writer = _write_csv
    elif fmt == "jsonl":
        writer = _write_jsonl
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
    if hasattr(destination, "write"):
        writer(records, destination)
        return
    path = Path(destination)
    with path.open("w", encoding="utf-8", newline="") as stream:
        writer(records, stream)


def read_jsonl(path: str | Path) -> list[dict]:
    """Parse a JSON-lines report back into records."""
    with Path(path).open("r", encoding="utf-8") as stream:
        return [json.loads(line) for line in stream if line.strip()]
