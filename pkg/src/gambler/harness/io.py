"""Whole-file atomic writes and the metrics CSV format."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from ..model import EpochRecord

METRICS_COLUMNS = EpochRecord.columns()
SUMMARY_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_metrics(path, records: list[EpochRecord]) -> None:
    write_csv(path, METRICS_COLUMNS, ([getattr(r, c) for c in METRICS_COLUMNS] for r in records))


def read_metrics(path) -> list[dict]:
    """Rows of ``metrics.csv`` with numbers parsed and blanks as ``None``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_COLUMNS:
            raise OSError(f"{path}: unexpected metrics header {reader.fieldnames}")
        rows = []
        for raw in reader:
            row = {}
            for k, v in raw.items():
                if k == "stage":
                    row[k] = v
                elif k == "epoch":
                    row[k] = int(v)
                else:
                    row[k] = float(v) if v != "" else None
            rows.append(row)
    return rows
