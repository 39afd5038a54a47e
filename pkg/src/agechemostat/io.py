"""JSON and CSV serialization.

Floats are written with 17 significant digits so every value round-trips
exactly. JSON relies on ``repr`` (shortest round-trip form), CSV on ``%.17g``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import IO, Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1


def _plain(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        # JSON has no inf/nan; null keeps the document valid
        return value if math.isfinite(value) else None
    return obj


def dumps_report(doc: Mapping[str, Any]) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(_plain(doc))
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def write_report(doc: Mapping[str, Any], path: str | Path) -> None:
    Path(path).write_text(dumps_report(doc))


def read_json(path: str | Path, what: str = "config") -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} file {p} must hold a JSON object")
    doc.pop("schema_version", None)
    return doc


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return "%.17g" % float(value)


def write_csv(stream: IO[str], header: Sequence[str], columns: Sequence[Sequence]) -> None:
    n = len(columns[0]) if columns else 0
    if any(len(c) != n for c in columns):
        raise ValueError("columns have different lengths")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for i in range(n):
        writer.writerow([format_number(c[i]) for c in columns])


def write_csv_file(path: str | Path, header: Sequence[str], columns: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        write_csv(fh, header, columns)


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"CSV file not found: {p}")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"CSV file {p} is empty")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise ConfigError(f"CSV file {p} has non-numeric entries: {exc}") from exc
    return {name: data[:, j].copy() for j, name in enumerate(header)}


__all__ = ["SCHEMA_VERSION", "dumps_report", "write_report", "read_json", "write_csv", "write_csv_file",
           "read_csv", "format_number"]
