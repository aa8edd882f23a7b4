from __future__ import annotations

import logging

import numpy as np
import pytest

from enf_tools.errors import DegenerateInputError, InputError
from enf_tools.models import BandHz, CombineConfig, EnfModel, EspritConfig, LagWindow, SampledSignal, SpectrumEstimate
from enf_tools.services import spectral, synth
from tests.helpers import tone

BAND_50 = BandHz(49.9, 50.1)


def _peak(spectrum: SpectrumEstimate) -> float:
    peak = spectral.quadratic_peak(spectrum)
    assert not peak.on_edge
    return peak.freq_hz


def test_grid_covers_band_inclusively():
    spectrum = spectral.stft_frame(tone(50.0, 1000.0, 16.0), "hann", BAND_50, 0.001)
    assert len(spectrum) == 201
    assert spectrum.freq_start_hz == pytest.approx(49.9)
    assert spectrum.freqs_hz[-1] == pytest.approx(50.1)


def test_stft_pure_tone_peaks_on_frequency():
    spectrum = spectral.stft_frame(tone(50.0, 1000.0, 16.0), "hann", BandHz(49.0, 51.0), 0.001)
    assert spectrum.freqs_hz[np.argmax(spectrum.power)] == pytest.approx(50.0, abs=0.001)


def test_stft_zero_segment_has_zero_power():
    silent = SampledSignal(np.zeros(16_000), 1000.0)
    assert not spectral.stft_frame(silent, "hann", BAND_50).power.any()


def test_stft_resolves_two_tones():
    both = tone(49.9, 1000.0, 16.0).samples + tone(50.1, 1000.0, 16.0, phase=1.1).samples
    spectrum = spectral.stft_frame(SampledSignal(both, 1000.0), "hann", BandHz(49.0, 51.0), 0.001)
    freqs = spectrum.freqs_hz
    lower = freqs < 50.0
    assert freqs[lower][np.argmax(spectrum.power[lower])] == pytest.approx(49.9, abs=0.005)
    assert freqs[~lower][np.argmax(spectrum.power[~lower])] == pytest.approx(50.1, abs=0.005)


def test_stft_rejects_band_beyond_nyquist():
    with pytest.raises(InputError):
        spectral.stft_frame(tone(10.0, 30.0, 21.0), "hann", BandHz(14.0, 16.0))


def test_autocorr_biased_examples():
    np.testing.assert_allclose(
        spectral.autocorr_biased(SampledSignal([1.0, -1.0, 1.0, -1.0], 1.0), 4), [1.0, -0.75, 0.5, -0.25]
    )
    constant = spectral.autocorr_biased(SampledSignal(np.full(4, 3.0), 1.0), 2)
    assert constant[1] == pytest.approx(3 * 9.0 / 4)
    x = np.random.default_rng(3).normal(size=50)
    assert spectral.autocorr_biased(SampledSignal(x, 1.0), 1)[0] == pytest.approx(np.mean(x**2))


def test_autocorr_rejects_lag_beyond_length():
    with pytest.raises(InputError):
        spectral.autocorr_biased(SampledSignal(np.ones(4), 1.0), 5)


def test_lag_weights_are_one_sided_and_normalised():
    np.testing.assert_allclose(spectral.lag_weights("bartlett", 4), [1.0, 0.75, 0.5, 0.25])
    np.testing.assert_array_equal(spectral.lag_weights("rectangular", 3), np.ones(3))
    assert spectral.lag_weights("hann", 8)[0] == 1.0


def test_bt_full_rectangular_window_is_the_periodogram(rng):
    x = np.cos(2 * np.pi * 10.2 * np.arange(200) / 100.0) + rng.normal(0.0, 0.5, 200)
    segment = SampledSignal(x, 100.0)
    band = BandHz(5.0, 15.0)
    bt = spectral.bt_spectrum(segment, LagWindow("rectangular", 200), band, 0.05)
    periodogram = spectral.stft_frame(segment, "rectangular", band, 0.05).power / 200
    np.testing.assert_allclose(bt.power, periodogram, rtol=1e-7, atol=1e-9 * periodogram.max())


def test_bt_rectangular_window_clips_negative_leakage():
    spectrum = spectral.bt_spectrum(tone(50.0, 1000.0, 16.0), LagWindow("rectangular", 4000), BandHz(49.5, 50.5), 0.005)
    assert spectrum.clipped
    assert spectrum.power.min() == 0.0


def test_bt_constant_signal_has_no_power_away_from_dc():
    spectrum = spectral.bt_spectrum(SampledSignal(np.full(1000, 2.0), 100.0), None, BandHz(10.0, 20.0), 0.1)
    # Power at DC is about c^2 * M = 1000; only the lag-window sidelobes reach 10 Hz.
    assert spectrum.power.max() < 1e-3 * 4.0 * 250


def test_bt_bartlett_peak_on_noisy_tone():
    segment = tone(50.0, 1000.0, 16.0, noise_std=0.07, seed=5)
    spectrum = spectral.bt_spectrum(segment, LagWindow.default_for(len(segment)), BAND_50, 0.001)
    assert _peak(spectrum) == pytest.approx(50.0, abs=0.01)


def test_esprit_noiseless_tone():
    freqs = spectral.esprit_frequencies(tone(10.05, 30.0, 21.0), EspritConfig())
    assert min(abs(f - 10.05) for f in freqs) < 1e-4
    assert freqs == sorted(freqs)
    assert all(0 < f < 15.0 for f in freqs)


def test_esprit_separates_close_tones_with_enough_order():
    x = tone(10.0, 30.0, 133.0).samples + tone(10.03, 30.0, 133.0, phase=2.0).samples
    freqs = spectral.esprit_frequencies(SampledSignal(x, 30.0), EspritConfig(cov_dim=10, model_order=4))
    np.testing.assert_allclose(freqs, [10.0, 10.03], atol=0.002)


@pytest.mark.parametrize("value", [0.0, 3.0])
def test_esprit_rejects_dc_only_input(value):
    with pytest.raises(DegenerateInputError):
        spectral.esprit_frequencies(SampledSignal(np.full(630, value), 30.0))


def test_esprit_needs_ten_snapshots_per_dimension():
    with pytest.raises(InputError):
        spectral.esprit_frequencies(tone(10.0, 30.0, 3.0), EspritConfig(cov_dim=10))


def test_local_snr_examples():
    flat = np.ones(101)
    noise_band = BandHz(0.0, 100.0)
    signal_band = BandHz(45.0, 55.0)
    spike = flat.copy()
    spike[50] = 50.0
    assert spectral.local_snr(SpectrumEstimate(0.0, 1.0, spike), signal_band, noise_band) == pytest.approx(50.0)
    assert spectral.local_snr(SpectrumEstimate(0.0, 1.0, flat), signal_band, noise_band) == pytest.approx(1.0)
    outside = flat.copy()
    outside[10] = 50.0
    assert spectral.local_snr(SpectrumEstimate(0.0, 1.0, outside), signal_band, noise_band) == pytest.approx(1.0)


def test_local_snr_degenerate_floors(caplog):
    zero = np.zeros(101)
    assert spectral.local_snr(SpectrumEstimate(0.0, 1.0, zero), BandHz(45.0, 55.0), BandHz(0.0, 100.0)) == 0.0
    zero[50] = 1.0
    with caplog.at_level(logging.WARNING):
        detail = spectral.local_snr_detail(SpectrumEstimate(0.0, 1.0, zero), BandHz(45.0, 55.0), BandHz(0.0, 100.0))
    assert detail.capped and detail.ratio == spectral.SNR_CAP
    assert "noise floor is zero" in caplog.text


def test_local_snr_requires_nested_supported_bands():
    spectrum = SpectrumEstimate(0.0, 1.0, np.ones(101))
    with pytest.raises(InputError):
        spectral.local_snr(spectrum, BandHz(40.0, 60.0), BandHz(45.0, 55.0))
    with pytest.raises(InputError):
        spectral.local_snr(spectrum, BandHz(45.0, 55.0), BandHz(0.0, 120.0))


def test_combine_concentrates_on_the_present_harmonic():
    segment = tone(150.03, 1000.0, 16.0, noise_std=0.1, seed=11)
    combined = spectral.combine_harmonics(segment, CombineConfig(), 0.001)
    assert combined.harmonics == tuple(range(1, 8))
    assert combined.weights.sum() == pytest.approx(1.0)
    assert combined.weights[2] >= 0.9
    assert _peak(combined.spectrum) == pytest.approx(50.01, abs=0.001)


def test_combine_drops_harmonics_above_nyquist(caplog):
    segment = tone(50.0, 600.0, 16.0, noise_std=0.1)
    with caplog.at_level(logging.WARNING):
        combined = spectral.combine_harmonics(segment, CombineConfig(), 0.001)
    assert combined.harmonics == (1, 2, 3, 4, 5)
    assert "above Nyquist" in caplog.text
    assert spectral.spectrum_combine(segment, CombineConfig(), 0.001).power.shape == combined.spectrum.power.shape


def test_quadratic_peak_symmetric_triple_is_exact():
    spectrum = SpectrumEstimate(10.0, 0.5, [1.0, 2.0, 8.0, 2.0, 1.0])
    assert spectral.quadratic_peak(spectrum) == (11.0, False)


def test_quadratic_peak_flags_edges():
    assert spectral.quadratic_peak(SpectrumEstimate(0.0, 1.0, [1.0, 2.0, 3.0, 4.0])).on_edge
    assert spectral.quadratic_peak(SpectrumEstimate(0.0, 1.0, [4.0, 3.0, 2.0, 1.0])).on_edge


def test_quadratic_peak_refines_between_grid_points():
    spectrum = spectral.stft_frame(tone(50.0004, 1000.0, 16.0), "hann", BAND_50, 0.001)
    assert abs(_peak(spectrum) - 50.0004) < 0.0001


def test_frequency_estimates_are_scale_invariant():
    segment = tone(50.013, 1000.0, 16.0, noise_std=0.05, seed=2)
    scaled = segment.with_samples(3.7 * segment.samples)
    for estimate in (
        lambda s: spectral.stft_frame(s, "hann", BAND_50),
        lambda s: spectral.bt_spectrum(s, None, BAND_50),
        lambda s: spectral.spectrum_combine(s, CombineConfig()),
    ):
        assert _peak(estimate(scaled)) == pytest.approx(_peak(estimate(segment)), abs=1e-9)
    video = tone(10.04, 30.0, 21.0, noise_std=0.05, seed=4)
    np.testing.assert_allclose(
        spectral.esprit_frequencies(video.with_samples(0.2 * video.samples)), spectral.esprit_frequencies(video), atol=1e-9
    )


def test_in_band_snr_prefers_the_tone():
    noise = np.random.default_rng(9).normal(size=1800)
    flicker = tone(10.04, 30.0, 60.0, noise_std=0.3, seed=9)
    band = BandHz(9.9, 10.1)
    assert spectral.in_band_snr(flicker, band) > 10 * spectral.in_band_snr(SampledSignal(noise, 30.0), band)


def test_combine_weighs_equal_harmonics_equally():
    walk = synth.gen_enf_walk(EnfModel(step_std_hz=0.0), 256.0, 1.0)
    weights = []
    for seed in range(8):
        mains = synth.render_mains(walk, 1000.0, np.ones(7), snr_db=-12.0, seed=seed)
        combined = spectral.combine_harmonics(mains, CombineConfig(), 0.005)
        assert combined.harmonics == tuple(range(1, 8))
        weights.append(combined.weights)
    np.testing.assert_allclose(np.mean(weights, axis=0), np.full(7, 1 / 7), rtol=0.1)


@pytest.mark.slow
def test_esprit_median_error_at_20_db():
    errors = []
    for seed in range(50):
        segment = tone(10.05, 30.0, 21.0, noise_std=np.sqrt(0.5 / 100), seed=seed)
        errors.append(min(abs(f - 10.05) for f in spectral.esprit_frequencies(segment)))
    assert np.median(errors) <= 0.002


@pytest.mark.slow
def test_combining_beats_the_fundamental_alone():
    walk = synth.gen_enf_walk(EnfModel(step_std_hz=0.0), 16.0, 1.0)
    combined, fundamental = [], []
    for seed in range(50):
        mains = synth.render_mains(walk, 1000.0, synth.default_harmonic_amps(7), snr_db=10.0, seed=seed)
        combined.append(spectral.quadratic_peak(spectral.spectrum_combine(mains, CombineConfig(), 0.001)).freq_hz)
        bt = spectral.bt_spectrum(mains, LagWindow.default_for(len(mains)), BAND_50, 0.001)
        fundamental.append(spectral.quadratic_peak(bt).freq_hz)
    assert np.var(combined) <= np.var(fundamental)
