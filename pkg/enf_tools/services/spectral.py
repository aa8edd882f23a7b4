"""Spectral estimators evaluated on dense frequency grids.

Every spectrum is computed as a direct DTFT over the requested band through the
chirp-z transform (``scipy.signal.zoom_fft``), so the grid spacing is whatever
the caller asks for and does not depend on the segment length.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from cachetools import LRUCache, cached
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg, signal

from enf_tools.errors import DegenerateInputError, InputError
from enf_tools.models import (
    BandHz,
    CombineConfig,
    EspritConfig,
    LagWindow,
    PeakEstimate,
    SampledSignal,
    SnrEstimate,
    SpectrumEstimate,
)
from enf_tools.models.types import AnalysisWindow, LagWindowKind

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP_HZ = 0.001
SNR_CAP = 1e12
# Noise context spans this many signal-band widths.
SNR_CONTEXT_FACTOR = 10
# Relative eigenvalue floor below which a covariance direction counts as empty.
_RANK_TOL = 1e-10

_window_cache: LRUCache = LRUCache(maxsize=64)
_lag_weight_cache: LRUCache = LRUCache(maxsize=64)


@dataclass(frozen=True, eq=False)
class CombinedSpectrum:
    spectrum: SpectrumEstimate
    harmonics: tuple[int, ...]
    weights: np.ndarray
    snrs: np.ndarray

    @property
    def weighted_snr(self) -> float:
        return float(np.dot(self.weights, self.snrs))


def grid_size(band: BandHz, grid_step_hz: float) -> int:
    return math.floor(band.width_hz / grid_step_hz + 1e-9) + 1


def context_band(band: BandHz, sample_rate_hz: float, factor: float = SNR_CONTEXT_FACTOR) -> BandHz:
    """Band ``factor`` times wider than ``band`` around its center, kept inside (0, Nyquist)."""
    nyquist = sample_rate_hz / 2
    half = 0.5 * band.width_hz * factor
    low = max(band.center_hz - half, 0.5 * band.low_hz)
    high = min(band.center_hz + half, band.high_hz + 0.5 * (nyquist - band.high_hz))
    return BandHz(low, high)


def aligned_context(band: BandHz, sample_rate_hz: float, grid_step_hz: float) -> tuple[BandHz, int, int]:
    """Context band on a grid through ``band.low_hz``.

    Returns the context band plus the index and point count of ``band`` inside
    the context grid, so a single evaluation serves both peak picking and SNR.
    """
    context = context_band(band, sample_rate_hz)
    n_below = math.floor((band.low_hz - context.low_hz) / grid_step_hz + 1e-9)
    n_above = math.floor((context.high_hz - band.high_hz) / grid_step_hz + 1e-9)
    m = grid_size(band, grid_step_hz)
    start = band.low_hz - n_below * grid_step_hz
    return BandHz(start, start + (n_below + m + n_above - 1) * grid_step_hz), n_below, m


def _check_band(band: BandHz, sample_rate_hz: float, grid_step_hz: float) -> None:
    if not band.inside_nyquist(sample_rate_hz):
        raise InputError(f"band {band} lies outside (0, {sample_rate_hz / 2:g}) Hz")
    if not 0 < grid_step_hz <= band.width_hz / 4:
        raise InputError(f"grid step {grid_step_hz} Hz must be positive and at most a quarter of the band width")


def _dtft(x: np.ndarray, sample_rate_hz: float, start_hz: float, step_hz: float, m: int) -> np.ndarray:
    """DTFT of ``x`` (time origin at sample 0) at ``start_hz + k * step_hz`` for k < m."""
    if m == 1:
        return np.array([np.sum(x * np.exp(-2j * np.pi * start_hz * np.arange(x.size) / sample_rate_hz))])
    stop_hz = start_hz + (m - 1) * step_hz
    return signal.zoom_fft(x, [start_hz, stop_hz], m=m, fs=sample_rate_hz, endpoint=True)


@cached(_window_cache)
def analysis_window(kind: AnalysisWindow, n_samples: int) -> np.ndarray:
    name = "boxcar" if kind == "rectangular" else kind
    window = signal.get_window(name, n_samples, fftbins=False)
    window.setflags(write=False)
    return window


@cached(_lag_weight_cache)
def lag_weights(kind: LagWindowKind, half_length_m: int) -> np.ndarray:
    """One-sided lag window w(0..M-1) of an even-symmetric window with w(0) = 1."""
    if kind == "rectangular":
        weights = np.ones(half_length_m)
    else:
        full = signal.get_window(kind, 2 * half_length_m + 1, fftbins=False)
        weights = full[half_length_m : 2 * half_length_m] / full[half_length_m]
    weights.setflags(write=False)
    return weights


def stft_frame(
    segment: SampledSignal,
    analysis_window_kind: AnalysisWindow,
    band: BandHz,
    grid_step_hz: float = DEFAULT_GRID_STEP_HZ,
) -> SpectrumEstimate:
    """|X_l(f)|^2 of one windowed segment on a dense grid over ``band``."""
    segment.require_samples()
    _check_band(band, segment.sample_rate_hz, grid_step_hz)
    m = grid_size(band, grid_step_hz)
    windowed = segment.samples * analysis_window(analysis_window_kind, len(segment))
    spectrum = _dtft(windowed, segment.sample_rate_hz, band.low_hz, grid_step_hz, m)
    return SpectrumEstimate(band.low_hz, grid_step_hz, np.abs(spectrum) ** 2)


def autocorr_biased(segment: SampledSignal, max_lag_m: int) -> np.ndarray:
    """r(k) = (1/N) sum_t x(t) x(t-k) for k = 0..M-1, divided by N at every lag."""
    segment.require_samples()
    x = segment.samples
    n = x.size
    if not 1 <= max_lag_m <= n:
        raise InputError(f"max lag {max_lag_m} must lie in 1..{n}")
    full = signal.correlate(x, x, mode="full", method="auto")
    return full[n - 1 : n - 1 + max_lag_m] / n


def _bt_power(
    autocorr: np.ndarray,
    weights: np.ndarray,
    sample_rate_hz: float,
    start_hz: float,
    step_hz: float,
    m: int,
) -> tuple[np.ndarray, bool]:
    lagged = autocorr * weights
    one_sided = _dtft(lagged, sample_rate_hz, start_hz, step_hz, m)
    # Even symmetry folds the negative lags onto the real part.
    power = 2.0 * one_sided.real - lagged[0]
    clipped = bool(np.any(power < 0))
    return np.maximum(power, 0.0), clipped


def bt_spectrum(
    segment: SampledSignal,
    lag_window: LagWindow | None,
    band: BandHz,
    grid_step_hz: float = DEFAULT_GRID_STEP_HZ,
) -> SpectrumEstimate:
    """Blackman-Tukey estimate: transform of the lag-windowed biased autocorrelation."""
    segment.require_samples()
    _check_band(band, segment.sample_rate_hz, grid_step_hz)
    lag_window = lag_window or LagWindow.default_for(len(segment))
    if lag_window.half_length_m > len(segment):
        raise InputError(f"lag window M={lag_window.half_length_m} exceeds segment length {len(segment)}")
    autocorr = autocorr_biased(segment, lag_window.half_length_m)
    power, clipped = _bt_power(
        autocorr,
        lag_weights(lag_window.kind, lag_window.half_length_m),
        segment.sample_rate_hz,
        band.low_hz,
        grid_step_hz,
        grid_size(band, grid_step_hz),
    )
    if clipped:
        logger.debug("Blackman-Tukey estimate over %s had negative leakage; clipped to zero", band)
    return SpectrumEstimate(band.low_hz, grid_step_hz, power, clipped=clipped)


def esprit_decomposition(segment: SampledSignal, config: EspritConfig) -> tuple[list[float], np.ndarray]:
    """ESPRIT roots (positive frequencies, ascending) and the covariance eigenvalues (descending)."""
    segment.require_samples()
    x = segment.samples
    m = config.cov_dim
    if x.size < 10 * m:
        raise InputError(f"ESPRIT needs at least {10 * m} samples, got {x.size}")
    snapshots = sliding_window_view(x, m)
    cov = snapshots.T @ snapshots / snapshots.shape[0]
    # Forward-backward averaging.
    cov = 0.5 * (cov + cov[::-1, ::-1])
    eigvals, eigvecs = linalg.eigh(cov)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    if eigvals[0] <= 0 or np.count_nonzero(eigvals > _RANK_TOL * eigvals[0]) < 2:
        raise DegenerateInputError("covariance has fewer than two significant directions; no oscillation to estimate")

    subspace = eigvecs[:, : config.model_order]
    rotation, *_ = linalg.lstsq(subspace[:-1], subspace[1:])
    roots = linalg.eigvals(rotation)
    freqs = np.angle(roots) / (2 * np.pi) * segment.sample_rate_hz
    nyquist = segment.sample_rate_hz / 2
    positive = sorted(float(f) for f in freqs if 0 < f < nyquist)
    return positive, eigvals


def esprit_frequencies(segment: SampledSignal, config: EspritConfig | None = None) -> list[float]:
    freqs, _ = esprit_decomposition(segment, config or EspritConfig())
    return freqs


def local_snr_detail(spectrum: SpectrumEstimate, signal_band: BandHz, noise_band: BandHz) -> SnrEstimate:
    """Peak power in ``signal_band`` over the median power of the rest of ``noise_band``."""
    if not noise_band.contains(signal_band):
        raise InputError(f"signal band {signal_band} must lie inside noise band {noise_band}")
    freqs = spectrum.freqs_hz
    eps = 1e-9 * spectrum.freq_step_hz + 1e-12
    half_step = spectrum.freq_step_hz / 2
    if noise_band.low_hz < freqs[0] - half_step or noise_band.high_hz > freqs[-1] + half_step:
        raise InputError(f"noise band {noise_band} exceeds the spectrum support")
    in_signal = (freqs >= signal_band.low_hz - eps) & (freqs <= signal_band.high_hz + eps)
    in_noise = (freqs >= noise_band.low_hz - eps) & (freqs <= noise_band.high_hz + eps) & ~in_signal
    if not in_signal.any() or not in_noise.any():
        raise InputError("signal and noise bands must each cover at least one grid point")

    peak = float(spectrum.power[in_signal].max())
    floor = float(np.median(spectrum.power[in_noise]))
    if peak == 0:
        return SnrEstimate(0.0, False)
    if floor <= 0:
        logger.warning("noise floor is zero around %s; SNR capped at %g", signal_band, SNR_CAP)
        return SnrEstimate(SNR_CAP, True)
    ratio = peak / floor
    if ratio >= SNR_CAP:
        return SnrEstimate(SNR_CAP, True)
    return SnrEstimate(ratio, False)


def local_snr(spectrum: SpectrumEstimate, signal_band: BandHz, noise_band: BandHz) -> float:
    return local_snr_detail(spectrum, signal_band, noise_band).ratio


def in_band_snr(segment: SampledSignal, band: BandHz, grid_step_hz: float | None = None) -> float:
    """Local SNR of ``band`` against its context, from a Hann-windowed spectrum of the whole segment."""
    context = context_band(band, segment.sample_rate_hz)
    if grid_step_hz is None:
        grid_step_hz = min(band.width_hz / 20, 1.0 / (2 * segment.duration_s))
    spectrum = stft_frame(segment, "hann", context, grid_step_hz)
    return local_snr(spectrum, band, context)


def combine_harmonics(
    segment: SampledSignal,
    config: CombineConfig,
    grid_step_hz: float = DEFAULT_GRID_STEP_HZ,
) -> CombinedSpectrum:
    """SNR-weighted sum of Blackman-Tukey strips around each harmonic, mapped onto the base band."""
    segment.require_samples()
    rate = segment.sample_rate_hz
    base = config.base_band
    _check_band(base, rate, grid_step_hz)
    m = grid_size(base, grid_step_hz)
    lag_window = LagWindow.default_for(len(segment), config.lag_window_kind)
    autocorr = autocorr_biased(segment, lag_window.half_length_m)
    weights_lag = lag_weights(lag_window.kind, lag_window.half_length_m)
    nyquist = rate / 2

    harmonics: list[int] = []
    strips: list[np.ndarray] = []
    snrs: list[float] = []
    clipped_any = False
    for z in range(1, config.harmonic_count_za + 1):
        strip_band = BandHz(z * base.low_hz, z * base.high_hz)
        if not strip_band.inside_nyquist(rate):
            logger.warning("harmonic %d (%s) is above Nyquist %g Hz; dropped", z, strip_band, nyquist)
            continue
        step = z * grid_step_hz
        context, n_below, _ = aligned_context(strip_band, rate, step)
        power, clipped = _bt_power(autocorr, weights_lag, rate, context.low_hz, step, grid_size(context, step))
        clipped_any |= clipped
        context_spectrum = SpectrumEstimate(context.low_hz, step, power, clipped=clipped)
        snr = local_snr(context_spectrum, strip_band, context_spectrum.band)
        strip = power[n_below : n_below + m]
        total = strip.sum()
        harmonics.append(z)
        strips.append(strip / total if total > 0 else np.zeros(m))
        snrs.append(snr)

    if not harmonics:
        raise InputError(f"every harmonic of {config.nominal_hz:g} Hz lies above Nyquist {nyquist:g} Hz")

    snr_arr = np.array(snrs)
    total_snr = snr_arr.sum()
    weights = snr_arr / total_snr if total_snr > 0 else np.full(snr_arr.size, 1.0 / snr_arr.size)
    combined = np.zeros(m)
    for weight, strip in zip(weights, strips, strict=True):
        combined += weight * strip
    spectrum = SpectrumEstimate(base.low_hz, grid_step_hz, combined, clipped=clipped_any)
    return CombinedSpectrum(spectrum=spectrum, harmonics=tuple(harmonics), weights=weights, snrs=snr_arr)


def spectrum_combine(
    segment: SampledSignal,
    config: CombineConfig,
    grid_step_hz: float = DEFAULT_GRID_STEP_HZ,
) -> SpectrumEstimate:
    return combine_harmonics(segment, config, grid_step_hz).spectrum


def quadratic_peak(spectrum: SpectrumEstimate) -> PeakEstimate:
    """Refine the spectral maximum with a parabola through log-power at the peak and its neighbours."""
    power = spectrum.power
    if power.size < 3:
        raise InputError("peak refinement needs at least three spectrum points")
    k = int(np.argmax(power))
    if k == 0 or k == power.size - 1:
        logger.debug("spectral maximum sits on the band edge at %.6f Hz", spectrum.freqs_hz[k])
        return PeakEstimate(float(spectrum.freq_start_hz + k * spectrum.freq_step_hz), True)
    left, center, right = power[k - 1 : k + 2]
    if min(left, center, right) > 0:
        left, center, right = np.log([left, center, right])
    denom = left - 2 * center + right
    offset = 0.0 if denom >= 0 else float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))
    return PeakEstimate(float(spectrum.freq_start_hz + (k + offset) * spectrum.freq_step_hz), False)
