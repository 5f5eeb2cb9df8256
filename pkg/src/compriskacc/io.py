"""CSV ingestion and report/ROC/simulation output files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .data import CompetingRiskSample
from .errors import DataError

COLUMNS = ("time", "status", "score")


class CsvFormatError(DataError):
    """Malformed input CSV; the message names the offending line."""


def read_sample_csv(path, n_causes: int | None = None, cause_of_interest: int = 1,
                    raw_marker: bool = False) -> CompetingRiskSample:
    """Read a ``time,status,score`` CSV into a validated sample.

    ``n_causes`` defaults to the largest status code (at least 2).
    """
    times, statuses, scores = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise CsvFormatError(f"{path}, line 1: header lacks column(s) {', '.join(missing)}")
        pos = [header.index(c) for c in COLUMNS]
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise CsvFormatError(f"{path}, line {line}: expected {len(header)} fields, got {len(row)}")
            t_raw, s_raw, u_raw = (row[p].strip() for p in pos)
            try:
                t = float(t_raw)
                u = float(u_raw)
            except ValueError:
                raise CsvFormatError(f"{path}, line {line}: non-numeric time or score") from None
            try:
                s = float(s_raw)
            except ValueError:
                raise CsvFormatError(f"{path}, line {line}: non-numeric status {s_raw!r}") from None
            if not (math.isfinite(t) and math.isfinite(u)):
                raise CsvFormatError(f"{path}, line {line}: non-finite time or score")
            if not math.isfinite(s) or s != int(s):
                raise CsvFormatError(f"{path}, line {line}: status must be an integer, got {s_raw!r}")
            if t < 0:
                raise CsvFormatError(f"{path}, line {line}: negative time")
            s = int(s)
            if s < 0 or (n_causes is not None and s > n_causes):
                raise CsvFormatError(f"{path}, line {line}: status {s} outside 0..{n_causes or 'K'}")
            times.append(t)
            statuses.append(s)
            scores.append(u)
    if not times:
        raise CsvFormatError(f"{path}: no data rows")
    if n_causes is None:
        n_causes = max(2, max(statuses))
    return CompetingRiskSample.from_arrays(times, statuses, scores, n_causes, cause_of_interest, raw_marker)


def write_sample_csv(sample: CompetingRiskSample, path) -> None:
    """Write a sample with full float precision so a re-read is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for t, s, u in zip(sample.time, sample.status, sample.score):
            w.writerow((repr(float(t)), int(s), repr(float(u))))


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def write_rows(rows: list[dict], columns, path) -> None:
    """CSV with a fixed column order; ``None``/NaN become empty cells."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
