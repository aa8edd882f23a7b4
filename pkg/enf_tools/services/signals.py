"""Elementary operations on sampled signals and ENF traces."""

from __future__ import annotations

import math

from enf_tools.errors import InputError
from enf_tools.models import EnfTrace, SampledSignal

# Absorbs float error in duration * rate products such as 133 * 30.
_SAMPLE_EPS = 1e-9


def slice_prefix(signal: SampledSignal, duration_s: float) -> SampledSignal:
    """Return the first ``floor(duration_s * rate)`` samples of ``signal``."""
    if not duration_s > 0:
        raise InputError(f"duration must be positive, got {duration_s}")
    if duration_s > signal.duration_s + _SAMPLE_EPS:
        raise InputError(f"duration {duration_s} s exceeds signal length {signal.duration_s:.6f} s")
    n = min(len(signal), math.floor(duration_s * signal.sample_rate_hz + _SAMPLE_EPS))
    if n == len(signal):
        return signal
    return signal.with_samples(signal.samples[:n])


def trace_prefix(trace: EnfTrace, duration_s: float) -> EnfTrace:
    """Keep the trace points with ``time_s <= duration_s``."""
    if not duration_s > trace.window_s:
        raise InputError(f"prefix duration {duration_s} s must exceed the trace window {trace.window_s} s")
    keep = trace.times_s <= duration_s + _SAMPLE_EPS
    if not keep.any():
        raise InputError(f"no trace points within the first {duration_s} s")
    if keep.all():
        return trace
    return trace.with_points(trace.times_s[keep], trace.freqs_hz[keep], trace.confidence[keep])
