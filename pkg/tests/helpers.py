from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from enf_tools.models import EnfTrace, SampledSignal


def tone(
    freq_hz: float,
    rate_hz: float,
    duration_s: float,
    *,
    amplitude: float = 1.0,
    phase: float = 0.3,
    noise_std: float = 0.0,
    seed: int = 0,
) -> SampledSignal:
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    samples = amplitude * np.cos(2 * np.pi * freq_hz * t + phase)
    if noise_std:
        samples = samples + np.random.default_rng(seed).normal(0.0, noise_std, t.size)
    return SampledSignal(samples, rate_hz, label="tone")


def fm_tone(
    inst_freq_hz: Callable[[np.ndarray], np.ndarray],
    rate_hz: float,
    duration_s: float,
    *,
    noise_std: float = 0.0,
    seed: int = 0,
) -> SampledSignal:
    """Cosine whose instantaneous frequency follows ``inst_freq_hz(t)``."""
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    phase = 2 * np.pi * cumulative_trapezoid(inst_freq_hz(t), t, initial=0.0)
    samples = np.cos(phase)
    if noise_std:
        samples = samples + np.random.default_rng(seed).normal(0.0, noise_std, t.size)
    return SampledSignal(samples, rate_hz, label="fm")


def make_trace(
    freqs_hz: Sequence[float] | np.ndarray,
    *,
    hop_s: float = 1.0,
    window_s: float = 2.0,
    start_s: float | None = None,
    nominal_hz: float = 50.0,
    confidence: Sequence[float] | np.ndarray | None = None,
) -> EnfTrace:
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    start = window_s / 2 if start_s is None else start_s
    return EnfTrace(
        nominal_hz=nominal_hz,
        window_s=window_s,
        hop_s=hop_s,
        times_s=start + hop_s * np.arange(freqs.size),
        freqs_hz=freqs,
        confidence=np.ones(freqs.size) if confidence is None else confidence,
    )
