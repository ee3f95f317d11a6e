# nested_covar/services/results.py
"""
Result emission: CSV or JSON files of metric rows plus a text table for the terminal.

Rows are written as they complete. The CSV writer flushes after every row;
the JSON writer rewrites the whole array atomically, so an interrupted run
always leaves a parseable file.
"""
import csv
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Sequence, Union

from ..errors import ResultsIOError
from ..schemas.experiment import RESULT_COLUMNS, MetricRow

logger = logging.getLogger(__name__)

ResultFormat = Literal["csv", "json"]


def format_number(value: Any) -> Any:
    """6 significant digits for floats; everything else unchanged"""
    if isinstance(value, bool) or not isinstance(value, float):
        return value
    if not math.isfinite(value):
        return None
    return float(f"{value:.6g}")


def _csv_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return "" if value is None else str(value)


def serialize_row(row: Union[MetricRow, Dict[str, Any]]) -> Dict[str, Any]:
    values = row.columns() if isinstance(row, MetricRow) else {name: row[name] for name in RESULT_COLUMNS}
    return {name: format_number(values[name]) for name in RESULT_COLUMNS}


class ResultWriter:
    """Streams metric rows to a CSV or JSON file; usable as a context manager"""

    def __init__(self, path: Union[str, Path], fmt: ResultFormat = "csv"):
        if fmt not in ("csv", "json"):
            raise ResultsIOError(f"unknown result format {fmt!r}")
        self.path = Path(path)
        self.fmt = fmt
        self.rows: List[Dict[str, Any]] = []
        self._handle = None
        self._csv = None
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if fmt == "csv":
                self._handle = self.path.open("w", newline="", encoding="utf-8")
                self._csv = csv.writer(self._handle, lineterminator="\n")
                self._csv.writerow(RESULT_COLUMNS)
                self._handle.flush()
            else:
                self._dump_json()
        except OSError as e:
            logger.error(f"Cannot open results file {self.path}: {e}")
            raise ResultsIOError(f"cannot write {self.path}: {e}") from e

    def _dump_json(self) -> None:
        staging = self.path.with_suffix(self.path.suffix + ".tmp")
        staging.write_text(json.dumps(self.rows, indent=2) + "\n", encoding="utf-8")
        os.replace(staging, self.path)

    def write(self, row: Union[MetricRow, Dict[str, Any]]) -> None:
        record = serialize_row(row)
        self.rows.append(record)
        try:
            if self.fmt == "csv":
                self._csv.writerow([_csv_cell(record[name]) for name in RESULT_COLUMNS])
                self._handle.flush()
            else:
                self._dump_json()
        except OSError as e:
            logger.error(f"Failed to append to results file {self.path}: {e}")
            raise ResultsIOError(f"cannot write {self.path}: {e}") from e
        logger.debug(f"Wrote result row {len(self.rows)} to {self.path}")

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> "ResultWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def emit_results(rows: Iterable[Union[MetricRow, Dict[str, Any]]], path: Union[str, Path], fmt: ResultFormat = "csv") -> Path:
    """Write all rows at once; no rows gives a header-only CSV or an empty JSON array"""
    with ResultWriter(path, fmt) as writer:
        for row in rows:
            writer.write(row)
    logger.info(f"Emitted {len(writer.rows)} result rows to {writer.path}")
    return writer.path


def read_results(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Parse a results file back into dicts with numeric columns as numbers"""
    path = Path(path)
    try:
        if path.suffix == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        with path.open(newline="", encoding="utf-8") as handle:
            records = list(csv.DictReader(handle))
    except (OSError, ValueError) as e:
        raise ResultsIOError(f"cannot read {path}: {e}") from e

    parsed = []
    for record in records:
        row = {}
        for name, cell in record.items():
            if name in ("family", "coupling"):
                row[name] = cell
            elif name in ("gamma", "m", "l", "k", "h"):
                row[name] = int(cell)
            else:
                row[name] = float(cell) if cell else None
        parsed.append(row)
    return parsed


def render_table(rows: Sequence[MetricRow], columns: Optional[Sequence[str]] = None) -> str:
    """Right-aligned text table of metric rows, one line per row"""
    columns = list(columns or RESULT_COLUMNS)
    body = [[_csv_cell(serialize_row(row)[name]) or "-" for name in columns] for row in rows]
    widths = [max([len(name)] + [len(line[i]) for line in body]) for i, name in enumerate(columns)]
    lines = ["  ".join(name.rjust(width) for name, width in zip(columns, widths))]
    lines.append("  ".join("-" * width for width in widths))
    lines.extend("  ".join(cell.rjust(width) for cell, width in zip(line, widths)) for line in body)
    return "\n".join(lines)
