"""Sliding-window ENF trace estimation."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from enf_tools.errors import EstimationError, InputError
from enf_tools.models import (
    BandHz,
    CombineConfig,
    EnfTrace,
    EspritConfig,
    EstimatorConfig,
    LagWindow,
    SampledSignal,
    SpectrumEstimate,
)
from enf_tools.services import aliasing, spectral

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_AUDIO_S = 16.0
DEFAULT_WINDOW_VIDEO_S = 21.0
DEFAULT_HOP_S = 1.0
DEFAULT_HALFWIDTH_HZ = 0.1


class SegmentEstimate(NamedTuple):
    freq_hz: float
    snr: float
    on_edge: bool


def confidence_from_snr(snr: float) -> float:
    if not np.isfinite(snr) or snr <= 0:
        return 0.0
    return float(np.clip(1.0 - 1.0 / snr, 0.0, 1.0))


def segment_layout(n_samples: int, sample_rate_hz: float, window_s: float, hop_s: float) -> tuple[int, int, int]:
    """Window length, hop and segment count in samples."""
    n_win = int(round(window_s * sample_rate_hz))
    n_hop = int(round(hop_s * sample_rate_hz))
    if n_win < 1 or n_hop < 1:
        raise InputError(f"window {window_s} s and hop {hop_s} s must each span at least one sample")
    if n_samples < n_win:
        raise InputError(f"signal of {n_samples / sample_rate_hz:.3f} s is shorter than one {window_s} s window")
    return n_win, n_hop, (n_samples - n_win) // n_hop + 1


def _peak_with_context(spectrum: SpectrumEstimate, n_below: int, m: int, band: BandHz) -> SegmentEstimate:
    in_band = SpectrumEstimate(band.low_hz, spectrum.freq_step_hz, spectrum.power[n_below : n_below + m])
    peak = spectral.quadratic_peak(in_band)
    snr = spectral.local_snr(spectrum, band, spectrum.band)
    return SegmentEstimate(peak.freq_hz, snr, peak.on_edge)


def _estimate_segment(segment: SampledSignal, config: EstimatorConfig) -> SegmentEstimate:
    band = config.band
    step = config.grid_step_hz
    if config.method in ("stft_peak", "bt_peak"):
        context, n_below, m = spectral.aligned_context(band, segment.sample_rate_hz, step)
        if config.method == "stft_peak":
            spectrum = spectral.stft_frame(segment, config.analysis_window, context, step)
        else:
            lag_window = config.options if isinstance(config.options, LagWindow) else None
            spectrum = spectral.bt_spectrum(segment, lag_window, context, step)
        return _peak_with_context(spectrum, n_below, m, band)

    if config.method == "combine":
        combine = config.options if isinstance(config.options, CombineConfig) else CombineConfig(
            nominal_hz=band.center_hz, band_halfwidth_hz=band.width_hz / 2
        )
        combined = spectral.combine_harmonics(segment, combine, step)
        peak = spectral.quadratic_peak(combined.spectrum)
        return SegmentEstimate(peak.freq_hz, combined.weighted_snr, peak.on_edge)

    esprit = config.options if isinstance(config.options, EspritConfig) else EspritConfig()
    roots, eigvals = spectral.esprit_decomposition(segment, esprit)
    in_band = [f for f in roots if band.low_hz <= f <= band.high_hz]
    if not in_band:
        raise EstimationError(f"no ESPRIT root inside {band}")
    freq = min(in_band, key=lambda f: abs(f - band.center_hz))
    # A real tone occupies two eigen-directions; the rest is noise.
    noise = eigvals[2:].mean() if eigvals.size > 2 else 0.0
    snr = spectral.SNR_CAP if noise <= 0 else min(eigvals[:2].mean() / noise, spectral.SNR_CAP)
    return SegmentEstimate(freq, float(snr), False)


def _untainted_fraction(start: int, n_win: int, n_samples: int, tainted: int) -> float:
    if tainted == 0:
        return 1.0
    head = max(0, min(start + n_win, tainted) - start)
    tail = max(0, start + n_win - max(start, n_samples - tainted))
    return max(0.0, 1.0 - (head + tail) / n_win)


def estimate_enf(signal: SampledSignal, config: EstimatorConfig, alias_context: float | None = None) -> EnfTrace:
    """Slide a window over ``signal`` and estimate one ENF value per segment.

    ``alias_context`` is the nominal source frequency the band was derived from
    (100 Hz for 50 Hz flicker). When given, each estimate is de-aliased at the
    signal rate and divided down to ENF units.
    """
    signal.require_samples()
    rate = signal.sample_rate_hz
    if not config.band.inside_nyquist(rate):
        raise InputError(f"estimation band {config.band} lies outside (0, {rate / 2:g}) Hz")
    n = len(signal)
    n_win, n_hop, count = segment_layout(n, rate, config.window_s, config.hop_s)
    window_s = n_win / rate
    hop_s = n_hop / rate

    times = window_s / 2 + hop_s * np.arange(count)
    freqs = np.full(count, float(config.nominal_hz))
    confidence = np.zeros(count)
    failures = 0
    for index in range(count):
        start = index * n_hop
        segment = signal.with_samples(signal.samples[start : start + n_win], tainted_edge_samples=0)
        try:
            estimate = _estimate_segment(segment, config)
            freq = estimate.freq_hz
            if alias_context is not None:
                freq = aliasing.dealias_enf(freq, rate, alias_context, config.nominal_hz)
        except EstimationError as exc:
            failures += 1
            logger.debug("segment %d at %.1f s failed: %s", index, times[index], exc)
            continue
        conf = 0.0 if estimate.on_edge else confidence_from_snr(estimate.snr)
        conf *= _untainted_fraction(start, n_win, n, signal.tainted_edge_samples)
        if abs(freq - config.nominal_hz) > 1.0:
            conf = 0.0
        freqs[index] = freq
        confidence[index] = conf

    if failures:
        logger.info("%d of %d segments failed and were set to nominal with confidence 0", failures, count)
    logger.debug("estimated %d points with %s over %s", count, config.method, config.band)
    return EnfTrace(
        nominal_hz=config.nominal_hz,
        window_s=window_s,
        hop_s=hop_s,
        times_s=times,
        freqs_hz=freqs,
        confidence=confidence,
    )
