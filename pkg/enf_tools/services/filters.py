"""Linear-phase FIR bandpass design and zero-phase filtering."""

from __future__ import annotations

import logging

import numpy as np
from cachetools import LRUCache, cached
from scipy import signal

from enf_tools.errors import InputError
from enf_tools.models import BandpassFilter, FilterSpec, SampledSignal

logger = logging.getLogger(__name__)

DEFAULT_FILTER_ORDER = 111

_design_cache: LRUCache = LRUCache(maxsize=32)


@cached(_design_cache)
def design_bandpass(spec: FilterSpec, sample_rate_hz: float) -> BandpassFilter:
    """Hamming-windowed sinc bandpass of length ``order_nu``, unity gain at the band center."""
    if not spec.band.inside_nyquist(sample_rate_hz):
        raise InputError(f"filter band {spec.band} lies outside (0, {sample_rate_hz / 2:g}) Hz")
    taps = signal.firwin(
        spec.order_nu,
        [spec.band.low_hz, spec.band.high_hz],
        pass_zero=False,
        window="hamming",
        fs=sample_rate_hz,
    )
    # Exact symmetry so the group delay is exactly (nu - 1) / 2.
    taps = 0.5 * (taps + taps[::-1])
    taps.setflags(write=False)

    too_narrow = spec.band.width_hz < 2.0 * sample_rate_hz / spec.order_nu
    if too_narrow:
        logger.warning(
            "pass band %s is narrower than %.3f Hz, the resolution of order %d at %g Hz",
            spec.band,
            2.0 * sample_rate_hz / spec.order_nu,
            spec.order_nu,
            sample_rate_hz,
        )
    return BandpassFilter(spec=spec, sample_rate_hz=sample_rate_hz, coeffs=taps, too_narrow=too_narrow)


def frequency_response(filt: BandpassFilter, freqs_hz: np.ndarray) -> np.ndarray:
    """Complex response of the filter at ``freqs_hz``."""
    _, response = signal.freqz(filt.coeffs, worN=np.asarray(freqs_hz, dtype=float), fs=filt.sample_rate_hz)
    return response


def filter_signal(sig: SampledSignal, coeffs: BandpassFilter | np.ndarray) -> SampledSignal:
    """Zero-phase FIR filtering: convolve and drop the (nu - 1) / 2 group delay.

    Output has the input length; the first and last (nu - 1) / 2 samples see
    the zero padding and are marked as tainted on the result.
    """
    taps = coeffs.coeffs if isinstance(coeffs, BandpassFilter) else np.asarray(coeffs, dtype=float)
    if taps.size % 2 == 0:
        raise InputError("zero-phase filtering needs an odd number of taps")
    sig.require_samples()
    if len(sig) <= taps.size:
        raise InputError(f"signal of {len(sig)} samples is not longer than the {taps.size}-tap filter")
    filtered = signal.fftconvolve(sig.samples, taps, mode="same")
    delay = (taps.size - 1) // 2
    return sig.with_samples(filtered, tainted_edge_samples=max(sig.tainted_edge_samples, delay))
