"""CSV files for time series and swept responses.

Time series: header ``time_s,displacement_m`` (or ``time_s,intensity_au``
for detector output).  Sweeps: ``frequency_hz,real,imag``.  Lines starting
with ``#`` carry ``key=value`` metadata.  Numbers are written with 17
significant digits so a write/read cycle is exact.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .bench import SweepResponse, TimeSeries

TIME_COLUMNS = ("displacement_m", "intensity_au")
SWEEP_HEADER = "frequency_hz,real,imag"


class CsvFormatError(ValueError):
    pass


def _meta_lines(meta: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in meta.items())


def write_timeseries(path, ts: TimeSeries, meta: dict | None = None, column: str = "displacement_m") -> None:
    if column not in TIME_COLUMNS:
        raise ValueError(f"unknown column {column!r}")
    meta = {"format": "timeseries", "sample_rate_hz": repr(float(ts.sample_rate)),
            "start_time_s": repr(float(ts.start_time)), **(meta or {})}
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    buf.write(f"time_s,{column}\n")
    np.savetxt(buf, np.column_stack([ts.times, ts.samples]), fmt="%.17g", delimiter=",")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _read(path):
    meta, header, rows = {}, None, []
    text = Path(path).read_text(encoding="utf-8")
    body_start = 0
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key:
                meta[key.strip()] = value.strip()
            continue
        header = line.strip()
        body_start = i + 1
        break
    if header is None:
        raise CsvFormatError(f"{path}: missing header row")
    body = "\n".join(ln for ln in lines[body_start:] if ln and not ln.startswith("#"))
    rows = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2) if body else np.empty((0, 0))
    return meta, header, rows


def read_timeseries(path):
    """Return ``(TimeSeries, column_name, metadata)``."""
    meta, header, rows = _read(path)
    cols = header.split(",")
    if len(cols) != 2 or cols[0] != "time_s" or cols[1] not in TIME_COLUMNS:
        raise CsvFormatError(f"{path}: expected header 'time_s,displacement_m' or 'time_s,intensity_au', got {header!r}")
    if rows.shape[0] == 0:
        raise CsvFormatError(f"{path}: no samples")
    t, y = rows[:, 0], rows[:, 1]
    if "sample_rate_hz" in meta:
        fs = float(meta["sample_rate_hz"])
    elif t.size > 1:
        fs = 1.0 / float(np.median(np.diff(t)))
    else:
        raise CsvFormatError(f"{path}: cannot infer the sample rate from one sample")
    start = float(meta.get("start_time_s", t[0]))
    return TimeSeries(fs, y, start), cols[1], meta


def write_sweep(path, sweep: SweepResponse, meta: dict | None = None) -> None:
    meta = {"format": "sweep", "units": "response in m per N", **(meta or {})}
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    buf.write(SWEEP_HEADER + "\n")
    np.savetxt(buf, np.column_stack([sweep.frequencies, sweep.response.real, sweep.response.imag]),
               fmt="%.17g", delimiter=",")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_sweep(path):
    """Return ``(SweepResponse, metadata)``."""
    meta, header, rows = _read(path)
    if header != SWEEP_HEADER:
        raise CsvFormatError(f"{path}: expected header {SWEEP_HEADER!r}, got {header!r}")
    if rows.shape[0] < 2:
        raise CsvFormatError(f"{path}: need at least two sweep points")
    return SweepResponse(rows[:, 0], rows[:, 1] + 1j * rows[:, 2]), meta
