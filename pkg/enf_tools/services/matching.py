"""Trace comparison by maximum correlation coefficient over integer-hop lags."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable

import numpy as np

from enf_tools.errors import EnfError, HopMismatchError, InputError, MatchError, UndefinedCorrelationError
from enf_tools.models import EnfTrace, MatchResult, SweepEntry
from enf_tools.services.signals import trace_prefix

logger = logging.getLogger(__name__)

DEFAULT_MIN_OVERLAP = 0.5


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("pearson needs two 1-D arrays of equal length")
    if a.size < 2:
        raise InputError("pearson needs at least two points")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    return float(np.clip(np.corrcoef(a, b)[0, 1], -1.0, 1.0))


def _check_hops(reference: EnfTrace, query: EnfTrace) -> float:
    if not math.isclose(reference.hop_s, query.hop_s, rel_tol=1e-9):
        raise HopMismatchError(f"traces have different hops: {reference.hop_s} s and {query.hop_s} s")
    if len(reference) < 2 or len(query) < 2:
        raise InputError("matching needs at least two points per trace")
    return reference.hop_s


def mcc(
    reference: EnfTrace,
    query: EnfTrace,
    max_lag_s: float = 0.0,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> MatchResult:
    """Maximum Pearson correlation over lags k * hop with |k * hop| <= max_lag_s.

    Points are paired by time: at lag k the query point at time t is compared
    with the reference point at time t - k * hop, so a query that lags the
    reference by 30 s peaks at +30 s. Points with confidence 0 in either trace
    drop out of that pair only. Lags left with fewer confident pairs than the
    minimum overlap are scored only when no other lag qualifies.
    """
    hop = _check_hops(reference, query)
    if max_lag_s < 0:
        raise InputError("max lag must be nonnegative")
    if not 0 < min_overlap <= 1:
        raise InputError("min overlap must lie in (0, 1]")

    n_ref, n_query = len(reference), len(query)
    # Reference index aligned with query index 0 at lag 0.
    origin = math.floor((query.times_s[0] - reference.times_s[0]) / hop + 0.5)
    max_k = math.floor(max_lag_s / hop + 1e-9)
    needed = min_overlap * min(n_ref, n_query) - 1e-9
    query_idx = np.arange(n_query)

    curve: list[tuple[float, float]] = []
    thin: list[tuple[float, float]] = []
    overlaps: dict[int, int] = {}
    any_overlap = False
    for k in range(-max_k, max_k + 1):
        ref_idx = query_idx + origin - k
        inside = (ref_idx >= 0) & (ref_idx < n_ref)
        overlap = int(inside.sum())
        if overlap < needed or overlap < 2:
            continue
        any_overlap = True
        q = query_idx[inside]
        r = ref_idx[inside]
        usable = (query.confidence[q] > 0) & (reference.confidence[r] > 0)
        if usable.sum() < 2:
            continue
        try:
            corr = pearson(reference.freqs_hz[r[usable]], query.freqs_hz[q[usable]])
        except UndefinedCorrelationError:
            logger.debug("lag %+d hops is degenerate; left out of the curve", k)
            continue
        overlaps[k] = overlap
        # Few confidence-positive pairs correlate near +/-1 by chance.
        if usable.sum() < needed:
            thin.append((k * hop, corr))
        else:
            curve.append((k * hop, corr))

    if not any_overlap:
        raise MatchError(f"no lag within +/-{max_lag_s:g} s overlaps at least {min_overlap:.0%} of the shorter trace")
    if not curve and thin:
        logger.warning(
            "no lag keeps %.0f%% of the shorter trace after dropping zero-confidence points; scoring %d thin lags",
            100 * min_overlap,
            len(thin),
        )
        curve = thin
    elif thin:
        logger.debug("%d lags left out with too few confidence-positive pairs", len(thin))
    if not curve:
        raise UndefinedCorrelationError("every admissible lag has a constant or empty overlap")

    best_lag, best_corr = max(curve, key=lambda row: (row[1], -abs(row[0]), -row[0]))
    best_k = round(best_lag / hop)
    return MatchResult(
        mcc=best_corr,
        best_lag_s=best_lag,
        overlap_s=overlaps[best_k] * hop,
        curve=np.array(curve, dtype=np.float64).reshape(-1, 2),
    )


def duration_sweep(
    reference: EnfTrace,
    query: EnfTrace,
    durations_s: Iterable[float],
    max_lag_s: float = 0.0,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> list[SweepEntry]:
    """``mcc`` of ``reference`` against each prefix of ``query``; failures are recorded, not raised."""
    entries: list[SweepEntry] = []
    for duration in durations_s:
        try:
            if duration < 2 * query.hop_s:
                raise InputError(f"duration {duration} s is shorter than two hops")
            result = mcc(reference, trace_prefix(query, duration), max_lag_s, min_overlap)
        except EnfError as exc:
            logger.warning("sweep entry %.6g s failed: %s", duration, exc)
            entries.append(SweepEntry(parameter=float(duration), error=str(exc)))
            continue
        entries.append(SweepEntry(parameter=float(duration), result=result))
    return entries
