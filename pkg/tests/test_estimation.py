from __future__ import annotations

import numpy as np
import pytest

from enf_tools.errors import InputError
from enf_tools.models import BandHz, EnfModel, EspritConfig, EstimatorConfig, FilterSpec, SampledSignal
from enf_tools.services import synth
from enf_tools.services.estimation import _untainted_fraction, confidence_from_snr, estimate_enf, segment_layout
from enf_tools.services.filters import design_bandpass, filter_signal
from tests.helpers import tone

FLICKER_BAND = BandHz(9.9, 10.1)


def _combine_config(band: BandHz = BandHz(49.9, 50.1)) -> EstimatorConfig:
    return EstimatorConfig(method="combine", window_s=16.0, hop_s=1.0, band=band)


def test_constant_mains_tracks_nominal_with_high_confidence():
    walk = synth.gen_enf_walk(EnfModel(step_std_hz=0.0), 120.0, 1.0)
    mains = synth.render_mains(walk, 1000.0, snr_db=20.0, seed=3)
    trace = estimate_enf(mains, _combine_config())
    assert len(trace) == 105
    np.testing.assert_allclose(trace.freqs_hz, 50.0, atol=0.001)
    assert trace.confidence.min() > 0.9
    assert trace.times_s[0] == pytest.approx(8.0)
    assert trace.window_s == 16.0 and trace.hop_s == 1.0


def test_linear_ramp_is_tracked_within_5_mhz():
    walk = SampledSignal(np.linspace(49.9, 50.1, 481), 1.0)
    mains = synth.render_mains(walk, 1000.0, snr_db=20.0, seed=4)
    trace = estimate_enf(mains, _combine_config(BandHz(49.85, 50.15)))
    truth = synth.truth_trace(walk, 16.0, 1.0)
    assert len(trace) == len(truth) == 465
    rmse = np.sqrt(np.mean((trace.freqs_hz - truth.freqs_hz) ** 2))
    assert rmse <= 0.005


def test_flicker_esprit_dealiases_to_enf():
    flicker = tone(10.04, 30.0, 120.0, noise_std=0.01, seed=8)
    config = EstimatorConfig(
        method="esprit", window_s=21.0, hop_s=1.0, band=FLICKER_BAND, options=EspritConfig(cov_dim=10, model_order=2)
    )
    trace = estimate_enf(flicker, config, alias_context=100.0)
    assert len(trace) == 100
    np.testing.assert_allclose(trace.freqs_hz, 50.02, atol=0.001)
    assert trace.confidence.min() > 0.9


@pytest.mark.parametrize("method", ["stft_peak", "bt_peak"])
def test_flicker_spectral_methods(method):
    flicker = tone(10.04, 30.0, 60.0, noise_std=0.1, seed=1)
    config = EstimatorConfig(method=method, window_s=21.0, hop_s=1.0, band=FLICKER_BAND)
    trace = estimate_enf(flicker, config, alias_context=100.0)
    np.testing.assert_allclose(trace.freqs_hz, 50.02, atol=0.002)


def test_point_count_follows_window_and_hop():
    signal = tone(10.0, 30.0, 100.0)
    config = EstimatorConfig(method="stft_peak", window_s=21.0, hop_s=2.0, band=FLICKER_BAND)
    trace = estimate_enf(signal, config)
    assert len(trace) == (100 - 21) // 2 + 1
    np.testing.assert_allclose(np.diff(trace.times_s), 2.0)


def test_estimates_are_amplitude_invariant():
    signal = tone(10.03, 30.0, 60.0, noise_std=0.2, seed=6)
    config = EstimatorConfig(method="stft_peak", window_s=21.0, hop_s=1.0, band=FLICKER_BAND)
    base = estimate_enf(signal, config)
    scaled = estimate_enf(signal.with_samples(12.5 * signal.samples), config)
    np.testing.assert_allclose(scaled.freqs_hz, base.freqs_hz, atol=1e-9)


def test_failed_segments_fall_back_to_nominal():
    off_band = tone(12.0, 30.0, 40.0)
    config = EstimatorConfig(
        method="esprit", window_s=21.0, hop_s=1.0, band=FLICKER_BAND, nominal_hz=50.0, options=EspritConfig(model_order=2)
    )
    trace = estimate_enf(off_band, config)
    np.testing.assert_array_equal(trace.freqs_hz, 50.0)
    np.testing.assert_array_equal(trace.confidence, 0.0)


def test_signal_shorter_than_a_window_is_rejected():
    with pytest.raises(InputError):
        estimate_enf(tone(10.0, 30.0, 10.0), EstimatorConfig(method="stft_peak", window_s=21.0, hop_s=1.0, band=FLICKER_BAND))


def test_tainted_edges_lower_confidence():
    flicker = tone(10.04, 30.0, 60.0, noise_std=0.05, seed=2)
    filtered = filter_signal(flicker, design_bandpass(FilterSpec(FLICKER_BAND, 211), 30.0))
    config = EstimatorConfig(method="stft_peak", window_s=21.0, hop_s=1.0, band=FLICKER_BAND)
    trace = estimate_enf(filtered, config, alias_context=100.0)
    assert trace.confidence[0] < trace.confidence[len(trace) // 2]
    assert trace.confidence[-1] < trace.confidence[len(trace) // 2]


def test_untainted_fraction():
    assert _untainted_fraction(0, 100, 1000, 0) == 1.0
    assert _untainted_fraction(0, 100, 1000, 10) == pytest.approx(0.9)
    assert _untainted_fraction(900, 100, 1000, 10) == pytest.approx(0.9)
    assert _untainted_fraction(450, 100, 1000, 10) == 1.0


def test_confidence_from_snr():
    assert confidence_from_snr(0.0) == 0.0
    assert confidence_from_snr(0.5) == 0.0
    assert confidence_from_snr(4.0) == pytest.approx(0.75)
    assert confidence_from_snr(1e12) == pytest.approx(1.0)


def test_segment_layout():
    assert segment_layout(480_000, 1000.0, 16.0, 1.0) == (16_000, 1000, 465)
    with pytest.raises(InputError):
        segment_layout(100, 1000.0, 16.0, 1.0)
