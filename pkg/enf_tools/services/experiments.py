"""Parameter sweeps over analysis window, filter order and reference choice."""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Iterable, Mapping, Sequence

import pandas as pd

from enf_tools.errors import EnfError
from enf_tools.models import BandHz, EnfTrace, EstimatorConfig, FilterSpec, MatchResult, SampledSignal, SweepEntry
from enf_tools.services.estimation import estimate_enf
from enf_tools.services.filters import design_bandpass, filter_signal
from enf_tools.services.matching import DEFAULT_MIN_OVERLAP, mcc
from enf_tools.services.trace_io import sweep_frame

logger = logging.getLogger(__name__)

SWEEP_FILTER_ORDERS = (51, 111, 211, 511)
DEFAULT_SEGMENT_WINDOWS_S = (21.0, 109.0, 133.0)


def segment_duration_sweep(
    reference: EnfTrace,
    signal: SampledSignal,
    base_config: EstimatorConfig,
    windows_s: Iterable[float] = DEFAULT_SEGMENT_WINDOWS_S,
    alias_context: float | None = None,
    max_lag_s: float = 0.0,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> list[SweepEntry]:
    """Re-estimate ``signal`` with each analysis window and match it against ``reference``."""
    entries: list[SweepEntry] = []
    for window in windows_s:
        try:
            config = dataclasses.replace(base_config, window_s=window, hop_s=min(base_config.hop_s, window))
            trace = estimate_enf(signal, config, alias_context)
            result = mcc(reference, trace, max_lag_s, min_overlap)
        except EnfError as exc:
            logger.warning("window %g s failed: %s", window, exc)
            entries.append(SweepEntry(parameter=float(window), error=str(exc)))
            continue
        logger.info("window %g s: MCC %.4f at lag %g s", window, result.mcc, result.best_lag_s)
        entries.append(SweepEntry(parameter=float(window), result=result))
    return entries


def filter_order_sweep(
    reference: EnfTrace,
    signal: SampledSignal,
    band: BandHz,
    orders: Iterable[int] = SWEEP_FILTER_ORDERS,
    config: EstimatorConfig | None = None,
    alias_context: float | None = None,
    max_lag_s: float = 0.0,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> list[SweepEntry]:
    """Bandpass ``signal`` with each filter order, estimate, and match against ``reference``."""
    if config is None:
        config = EstimatorConfig(method="stft_peak", window_s=21.0, hop_s=1.0, band=band)
    entries: list[SweepEntry] = []
    for order in orders:
        try:
            filt = design_bandpass(FilterSpec(band=band, order_nu=order), signal.sample_rate_hz)
            trace = estimate_enf(filter_signal(signal, filt), config, alias_context)
            result = mcc(reference, trace, max_lag_s, min_overlap)
        except EnfError as exc:
            logger.warning("filter order %d failed: %s", order, exc)
            entries.append(SweepEntry(parameter=float(order), error=str(exc)))
            continue
        logger.info("order %d: MCC %.4f", order, result.mcc)
        entries.append(SweepEntry(parameter=float(order), result=result))
    return entries


def compare_references(
    query: EnfTrace,
    references: Mapping[str, EnfTrace],
    max_lag_s: float = 0.0,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> dict[str, MatchResult]:
    """Match one query against several references, e.g. mains and photodiode."""
    return {name: mcc(reference, query, max_lag_s, min_overlap) for name, reference in references.items()}


def sweep_table(entries: Sequence[SweepEntry]) -> pd.DataFrame:
    return sweep_frame(entries, "parameter", with_error=True)
