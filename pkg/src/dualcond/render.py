from __future__ import annotations

import csv
from json import dumps
from pathlib import Path

import numpy as np


def format_number(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def dump_json(payload) -> str:
    return dumps(payload, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(payload), encoding="utf-8")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else format_number(cell) for cell in row])
    return path


def elbo_trace_rows(trace) -> list[tuple]:
    return [(str(i + 1), value) for i, value in enumerate(trace)]


def history_rows(history) -> list[tuple]:
    rows = []
    for record in history.records:
        wall = float(np.sum(list(record.wall_ms.values())))
        rows.append((str(record.iteration), record.incumbent, record.batch_best, wall))
    return rows
