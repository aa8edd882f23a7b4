"""Synthetic ENF walks, mains and photodiode waveforms, flickering video, and file writers."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.io import wavfile

from enf_tools.errors import InputError
from enf_tools.models import EnfModel, EnfTrace, Occluder, SampledSignal, SceneModel, StereoRecording, VideoLuma

logger = logging.getLogger(__name__)

DEFAULT_HARMONIC_COUNT = 7
DEFAULT_EXPOSURE_FRACTION = 0.5
DEFAULT_FLICKER_DEPTH = 0.1
# Phase is integrated at no less than this multiple of the highest frequency.
GENERATION_OVERSAMPLING = 10
EXPOSURE_SUBSAMPLES = 32
_Y4M_MAX_TERM = 2**31 - 1
WAV_PEAK = 0.9


def default_harmonic_amps(count: int = DEFAULT_HARMONIC_COUNT) -> np.ndarray:
    """1/z amplitude profile."""
    return 1.0 / np.arange(1, count + 1)


def gen_enf_walk(model: EnfModel, duration_s: float, rate_hz: float) -> SampledSignal:
    """Gaussian random walk of instantaneous ENF, clamped to nominal +/- max_dev, covering [0, duration]."""
    if not (duration_s > 0 and rate_hz > 0):
        raise InputError("walk duration and rate must be positive")
    n = math.floor(duration_s * rate_hz + 1e-9) + 1
    rng = np.random.default_rng(model.seed)
    steps = rng.normal(0.0, model.step_std_hz / math.sqrt(rate_hz), n - 1)
    low, high = model.nominal_hz - model.max_dev_hz, model.nominal_hz + model.max_dev_hz
    values = np.empty(n)
    values[0] = model.nominal_hz
    for i, step in enumerate(steps, start=1):
        values[i] = min(high, max(low, values[i - 1] + step))
    return SampledSignal(values, rate_hz, label="enf")


def _walk_span_s(enf: SampledSignal) -> float:
    return (len(enf) - 1) / enf.sample_rate_hz


def _phase(enf: SampledSignal, out_rate_hz: float, n_out: int, highest_multiple: float) -> np.ndarray:
    """ENF phase 2*pi*integral(f) at the output instants, integrated on a finer grid."""
    factor = max(1, math.ceil(GENERATION_OVERSAMPLING * highest_multiple * float(enf.samples.max()) / out_rate_hz))
    gen_rate = factor * out_rate_hz
    t_gen = np.arange((n_out - 1) * factor + 1) / gen_rate
    t_walk = np.arange(len(enf)) / enf.sample_rate_hz
    f_gen = np.interp(t_gen, t_walk, enf.samples)
    phase = 2 * np.pi * cumulative_trapezoid(f_gen, dx=1.0 / gen_rate, initial=0.0)
    return phase[::factor]


def _noise(rng: np.random.Generator, n: int, signal_power: float, snr_db: float | None) -> np.ndarray:
    if snr_db is None or math.isinf(snr_db):
        return np.zeros(n)
    sigma = math.sqrt(signal_power / 10 ** (snr_db / 10))
    return rng.normal(0.0, sigma, n)


def _output_length(enf: SampledSignal, out_rate_hz: float) -> int:
    if not out_rate_hz > 0:
        raise InputError("output rate must be positive")
    enf.require_samples()
    return math.floor(_walk_span_s(enf) * out_rate_hz + 1e-9)


def render_mains(
    enf: SampledSignal,
    out_rate_hz: float,
    harmonic_amps: Sequence[float] | np.ndarray | None = None,
    snr_db: float | None = None,
    seed: int = 0,
) -> SampledSignal:
    """sum_z amp_z cos(z * phi(t)) plus white noise at ``snr_db`` against the total harmonic power."""
    amps = default_harmonic_amps() if harmonic_amps is None else np.asarray(harmonic_amps, dtype=np.float64)
    if amps.size == 0:
        raise InputError("at least one harmonic amplitude is required")
    top = amps.size * float(enf.samples.max())
    if top >= out_rate_hz / 2:
        raise InputError(f"harmonic {amps.size} at {top:g} Hz is not below Nyquist {out_rate_hz / 2:g} Hz")
    n = _output_length(enf, out_rate_hz)
    phase = _phase(enf, out_rate_hz, n, amps.size)
    clean = np.zeros(n)
    for z, amp in enumerate(amps, start=1):
        clean += amp * np.cos(z * phase)
    rng = np.random.default_rng(seed)
    noisy = clean + _noise(rng, n, float(np.sum(amps**2) / 2), snr_db)
    return SampledSignal(noisy, out_rate_hz, label="mains")


def render_light(
    enf: SampledSignal,
    out_rate_hz: float,
    flicker_depth: float = DEFAULT_FLICKER_DEPTH,
    snr_db: float | None = None,
    seed: int = 0,
) -> SampledSignal:
    """Photodiode intensity 1 + depth * cos(2 * phi(t)): flicker at twice the ENF."""
    if not 0 <= flicker_depth <= 1:
        raise InputError("flicker depth must lie in [0, 1]")
    if 2 * float(enf.samples.max()) >= out_rate_hz / 2:
        raise InputError("flicker frequency is not below Nyquist")
    n = _output_length(enf, out_rate_hz)
    phase = _phase(enf, out_rate_hz, n, 2)
    clean = 1.0 + flicker_depth * np.cos(2 * phase)
    rng = np.random.default_rng(seed)
    return SampledSignal(clean + _noise(rng, n, flicker_depth**2 / 2, snr_db), out_rate_hz, label="photodiode")


def truth_trace(
    enf: SampledSignal,
    window_s: float | None = None,
    hop_s: float | None = None,
    nominal_hz: float = 50.0,
) -> EnfTrace:
    """Ground-truth trace of a walk.

    Without a window this is the walk itself, one point per walk sample. With a
    window it is the mean instantaneous ENF over each analysis window, stamped
    at the window center like estimated traces.
    """
    enf.require_samples()
    period = 1.0 / enf.sample_rate_hz
    if window_s is None:
        times = np.arange(len(enf)) * period
        return EnfTrace(nominal_hz, period, period, times, enf.samples, np.ones(len(enf)))

    hop_s = hop_s or period
    span = _walk_span_s(enf)
    if not 0 < window_s <= span:
        raise InputError(f"truth window {window_s} s must lie in (0, {span:g}] s")
    count = math.floor((span - window_s) / hop_s + 1e-9) + 1
    starts = hop_s * np.arange(count)
    t_walk = np.arange(len(enf)) * period
    integral = cumulative_trapezoid(enf.samples, t_walk, initial=0.0)
    # The walk is piecewise linear, so its integral is exact at the samples and
    # piecewise quadratic in between; fine sampling keeps interpolation error negligible.
    means = (np.interp(starts + window_s, t_walk, integral) - np.interp(starts, t_walk, integral)) / window_s
    return EnfTrace(nominal_hz, window_s, hop_s, starts + window_s / 2, means, np.ones(count))


def _bounce(position: float, span: float) -> float:
    if span <= 0:
        return 0.0
    folded = position % (2 * span)
    return folded if folded <= span else 2 * span - folded


def occluder_origin(occluder: Occluder, scene: SceneModel, t_s: float) -> tuple[int, int]:
    """Top-left pixel of the occluder at time ``t_s``; it bounces off the frame edges."""
    w, h = occluder.size
    x = _bounce(occluder.start[0] + occluder.velocity_px_s[0] * t_s, scene.width - w)
    y = _bounce(occluder.start[1] + occluder.velocity_px_s[1] * t_s, scene.height - h)
    return int(round(x)), int(round(y))


class _RenderedFrames:
    """Re-iterable lazy frame source; every pass renders the same frames."""

    def __init__(self, scene: SceneModel, factors: np.ndarray, fps: Fraction, seed: int) -> None:
        self._scene = scene
        self._factors = factors
        self._fps = fps
        self._seed = seed

    def __len__(self) -> int:
        return int(self._factors.size)

    def __iter__(self) -> Iterator[np.ndarray]:
        for index in range(self._factors.size):
            yield self.render(index)

    def render(self, index: int) -> np.ndarray:
        scene = self._scene
        frame = scene.base_luma * self._factors[index]
        if scene.occluder is not None:
            x0, y0 = occluder_origin(scene.occluder, scene, index / float(self._fps))
            w, h = scene.occluder.size
            frame[y0 : y0 + h, x0 : x0 + w] = scene.occluder.luma
        if scene.noise_std > 0:
            rng = np.random.default_rng([self._seed, index])
            frame = frame + rng.normal(0.0, scene.noise_std, frame.shape)
        return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def render_video(
    enf: SampledSignal,
    scene: SceneModel,
    fps: Fraction | float,
    duration_s: float,
    exposure_fraction: float = DEFAULT_EXPOSURE_FRACTION,
    seed: int = 0,
) -> VideoLuma:
    """Global-shutter camera looking at a flickering scene.

    Each frame's luma is the base scene times the flicker averaged over that
    frame's exposure window, with the occluder and sensor noise applied on top.
    Frames are rendered lazily, noise seeded per frame index.
    """
    fps = Fraction(fps).limit_denominator(1_000_000) if not isinstance(fps, Fraction) else fps
    if fps <= 0:
        raise InputError("fps must be positive")
    if not 0 < exposure_fraction <= 1:
        raise InputError("exposure fraction must lie in (0, 1]")
    if duration_s > _walk_span_s(enf) + 1e-9:
        raise InputError(f"video of {duration_s} s is longer than the {_walk_span_s(enf):g} s walk")
    n_frames = math.floor(duration_s * fps + Fraction(1, 10**9))
    if n_frames < 1:
        raise InputError("duration is shorter than one frame")

    # Phase on a fine uniform grid, then interpolated at exposure sub-samples.
    fine_rate = 20.0 * float(enf.samples.max())
    n_fine = math.floor(_walk_span_s(enf) * fine_rate + 1e-9) + 1
    fine_phase = _phase(enf, fine_rate, n_fine, 2)
    t_fine = np.arange(n_fine) / fine_rate
    exposure_s = exposure_fraction / float(fps)
    offsets = (np.arange(EXPOSURE_SUBSAMPLES) + 0.5) / EXPOSURE_SUBSAMPLES * exposure_s
    instants = (np.arange(n_frames) / float(fps))[:, None] + offsets[None, :]
    phase = np.interp(instants, t_fine, fine_phase)
    factors = 1.0 + scene.flicker_depth * np.cos(2 * phase).mean(axis=1)

    logger.debug("rendering %d frames of %dx%d at %s fps", n_frames, scene.width, scene.height, fps)
    return VideoLuma(
        width=scene.width,
        height=scene.height,
        frame_rate_hz=fps,
        frames=_RenderedFrames(scene, factors, fps, seed),
    )


def peak_normalize(signal: SampledSignal, peak: float = WAV_PEAK) -> SampledSignal:
    """Scale so the largest magnitude is ``peak``; 16-bit PCM clips anything beyond 1."""
    top = float(np.max(np.abs(signal.samples)))
    if top == 0:
        return signal
    return signal.with_samples(signal.samples * (peak / top))


def write_wav(signals: SampledSignal | StereoRecording | Sequence[SampledSignal], path: str | Path) -> None:
    """16-bit PCM RIFF/WAVE writer; two signals become left and right."""
    if isinstance(signals, SampledSignal):
        channels = [signals]
    elif isinstance(signals, StereoRecording):
        channels = [signals.left, signals.right]
    else:
        channels = list(signals)
    if len(channels) not in (1, 2):
        raise InputError("WAV output takes one or two signals")
    rate = channels[0].sample_rate_hz
    if any(len(c) != len(channels[0]) or c.sample_rate_hz != rate for c in channels):
        raise InputError("stereo channels must share length and sample rate")
    if rate != int(rate):
        raise InputError(f"WAV sample rate must be an integer, got {rate}")

    pcm = np.column_stack([np.clip(np.rint(c.samples * 32768.0), -32768, 32767) for c in channels]).astype(np.int16)
    wavfile.write(path, int(rate), pcm if len(channels) == 2 else pcm[:, 0])


def y4m_header(video: VideoLuma) -> bytes:
    rate = video.frame_rate_hz
    if rate.numerator > _Y4M_MAX_TERM or rate.denominator > _Y4M_MAX_TERM:
        raise InputError(f"frame rate {rate} has no 32-bit Y4M rational form")
    return f"YUV4MPEG2 W{video.width} H{video.height} F{rate.numerator}:{rate.denominator} Ip A1:1 Cmono\n".encode("ascii")


def write_y4m(video: VideoLuma, path: str | Path) -> int:
    """Write a chroma-free Y4M stream; returns the number of frames written."""
    header = y4m_header(video)
    count = 0
    with open(path, "wb") as handle:
        handle.write(header)
        for frame in video.iter_frames():
            plane = np.asarray(frame)
            if plane.dtype != np.uint8:
                if plane.min() < 0 or plane.max() > 255:
                    raise InputError(f"frame {count} has luma outside [0, 255]")
                plane = plane.astype(np.uint8)
            handle.write(b"FRAME\n")
            handle.write(plane.tobytes())
            count += 1
    return count
