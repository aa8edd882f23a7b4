"""Trace CSV, match JSON and sweep CSV formats."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from enf_tools.errors import InputError, ParseError
from enf_tools.models import EnfTrace, MatchResult, SweepEntry

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["time_s", "freq_hz", "confidence"]
SWEEP_COLUMNS = ["duration_s", "mcc", "best_lag_s"]
# 17 significant digits round-trip every float64.
FLOAT_FORMAT = "%.17g"


def trace_frame(trace: EnfTrace) -> pd.DataFrame:
    return pd.DataFrame({"time_s": trace.times_s, "freq_hz": trace.freqs_hz, "confidence": trace.confidence})


def write_trace_csv(trace: EnfTrace, path: str | Path) -> None:
    trace_frame(trace).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _infer_nominal(freqs: np.ndarray) -> float:
    return 60.0 if float(np.median(freqs)) > 55.0 else 50.0


def read_trace_csv(path: str | Path, *, nominal_hz: float | None = None, window_s: float | None = None) -> EnfTrace:
    """Load a trace written by ``write_trace_csv``.

    The hop comes from the time spacing. The window is recovered from the
    first time stamp (stamps sit at window centers); traces that start at 0
    get a window equal to the hop.
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not a trace CSV: {exc}") from exc
    if list(frame.columns) != TRACE_COLUMNS:
        raise ParseError(f"{path}: header must be {','.join(TRACE_COLUMNS)}, got {','.join(map(str, frame.columns))}")
    if len(frame) < 2:
        raise ParseError(f"{path}: a trace needs at least two rows")
    try:
        values = frame.to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric trace value: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise ParseError(f"{path}: trace contains empty or non-finite values")

    times, freqs, confidence = values.T
    hop = (times[-1] - times[0]) / (len(times) - 1)
    if window_s is None:
        window_s = 2 * times[0] if times[0] > 0 else hop
    try:
        return EnfTrace(
            nominal_hz=nominal_hz if nominal_hz is not None else _infer_nominal(freqs),
            window_s=window_s,
            hop_s=hop,
            times_s=times,
            freqs_hz=freqs,
            confidence=confidence,
        )
    except InputError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_match_json(result: MatchResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(result.to_json_dict(), handle, indent=2)
        handle.write("\n")


def sweep_frame(entries: Sequence[SweepEntry], parameter_column: str = "parameter", *, with_error: bool = True) -> pd.DataFrame:
    """One row per sweep entry; failed entries carry NaN results."""
    rows = []
    for entry in entries:
        row = {
            parameter_column: entry.parameter,
            "mcc": entry.result.mcc if entry.result else np.nan,
            "best_lag_s": entry.result.best_lag_s if entry.result else np.nan,
        }
        if with_error:
            row["error"] = entry.error or ""
        rows.append(row)
    columns = [parameter_column, "mcc", "best_lag_s"] + (["error"] if with_error else [])
    return pd.DataFrame(rows, columns=columns)


def write_sweep_csv(entries: Sequence[SweepEntry], path: str | Path) -> None:
    frame = sweep_frame(entries, "duration_s", with_error=False)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
