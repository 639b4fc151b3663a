"""CSV formats: time series, analyzer traces and sweep tables.

Dialect: comma separated, ``.`` decimal point, mandatory header, UTF-8, LF
line endings, numbers written with 9 significant digits.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .sigproc import SpectrumTrace, TimeSeries

TIMESERIES_HEADER = ("t_s", "power_W")
TRACE_FREQ_COLUMN = "freq_Hz"
TRACE_SNL_COLUMN = "power_dB_rel_SNL"
SWEEP_HEADER = ("field_mT", "eta_f_mean", "eta_f_std", "p_omega_W", "noise_floor_dB", "readout")


class CsvFormatError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".9g")


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, format_csv(header, rows))


def _read_numeric(path, expected_first: str):
    """Return (header, columns) of a two-column numeric CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    if len(header) != 2 or header[0] != expected_first:
        raise CsvFormatError(f"{path}: line 1: expected header '{expected_first},<value column>', got {','.join(header)!r}")
    a, b = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise CsvFormatError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
        try:
            a.append(float(row[0]))
        except ValueError:
            raise CsvFormatError(f"{path}: line {lineno}: bad {header[0]} value {row[0]!r}") from None
        try:
            b.append(float(row[1]))
        except ValueError:
            raise CsvFormatError(f"{path}: line {lineno}: bad {header[1]} value {row[1]!r}") from None
    if not a:
        raise CsvFormatError(f"{path}: no data rows")
    return header, np.array(a), np.array(b)


def read_timeseries_csv(path) -> TimeSeries:
    header, t, p = _read_numeric(path, TIMESERIES_HEADER[0])
    if len(t) < 2:
        raise CsvFormatError(f"{path}: need at least two samples")
    dt = np.diff(t)
    step = (t[-1] - t[0]) / (len(t) - 1)
    if step <= 0 or np.max(np.abs(dt - step)) > 1e-6 * step:
        raise CsvFormatError(f"{path}: time column is not uniformly sampled")
    return TimeSeries(1.0 / step, p, float(t[0]))


def write_timeseries_csv(path, ts: TimeSeries) -> None:
    write_csv(path, TIMESERIES_HEADER, zip(ts.times, ts.samples))


def read_trace_csv(path):
    """Return ``(frequencies, power_db, column_name)``."""
    header, f, p = _read_numeric(path, TRACE_FREQ_COLUMN)
    if not header[1].startswith("power_dB"):
        raise CsvFormatError(f"{path}: line 1: power column must start with 'power_dB', got {header[1]!r}")
    if len(f) > 1 and not np.all(np.diff(f) > 0):
        raise CsvFormatError(f"{path}: frequencies must be strictly increasing")
    return f, p, header[1]


def write_trace_csv(path, trace: SpectrumTrace, column: str = TRACE_SNL_COLUMN) -> None:
    write_csv(path, (TRACE_FREQ_COLUMN, column), zip(trace.frequencies, trace.power_db))


def sweep_rows(results):
    for result in results:
        for pt in result.points:
            yield (pt.field * 1e3, pt.mean_eta_f, pt.std_eta_f, pt.p_omega, pt.noise_floor_db, result.readout)


def format_sweep_csv(results) -> str:
    return format_csv(SWEEP_HEADER, sweep_rows(results))
