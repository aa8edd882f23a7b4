"""Command-line front end: extract, match, sweep, synthesize and run experiments.

Exit codes: 0 success, 2 bad input (flags, files, formats), 3 estimation or
matching failure, 130 interrupted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from core.config import apply_presets, load_presets
from enf_tools.errors import EnfError, EstimationError, InputError, MatchError, ParseError
from enf_tools.models import (
    LAG_WINDOW_KINDS,
    BandHz,
    CombineConfig,
    EnfModel,
    EnfTrace,
    EspritConfig,
    EstimatorConfig,
    FilterSpec,
    LagWindow,
    Occluder,
    SampledSignal,
    SceneModel,
    SlicParams,
)
from enf_tools.services import experiments, ingest, synth, trace_io, video_region
from enf_tools.services.aliasing import alias_frequency
from enf_tools.services.estimation import DEFAULT_HALFWIDTH_HZ, DEFAULT_HOP_S, DEFAULT_WINDOW_AUDIO_S, DEFAULT_WINDOW_VIDEO_S, estimate_enf
from enf_tools.services.filters import DEFAULT_FILTER_ORDER, design_bandpass, filter_signal
from enf_tools.services.matching import DEFAULT_MIN_OVERLAP, duration_sweep, mcc
from enf_tools.services.spectral import DEFAULT_GRID_STEP_HZ

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ESTIMATION = 3
EXIT_INTERRUPTED = 130

METHODS = {"stft": "stft_peak", "bt": "bt_peak", "esprit": "esprit", "combine": "combine"}
# Below this the flicker alias is too close to DC to separate from scene changes.
MIN_ALIAS_HZ = 0.5


# ---------------------------------------------------------------------------
# Argument converters


def _band(text: str) -> BandHz:
    return BandHz.parse(text)


def _fps(text: str) -> Fraction:
    try:
        rate = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"invalid frame rate {text!r}") from exc
    if rate <= 0:
        raise argparse.ArgumentTypeError("frame rate must be positive")
    return rate


def _size(text: str) -> tuple[int, int]:
    try:
        width, height = (int(part) for part in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like WxH, got {text!r}") from exc
    if width <= 0 or height <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return width, height


def _float_list(text: str) -> list[float]:
    """Comma list (``60,120``) or inclusive range (``60:480:60``)."""
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            return list(np.arange(start, stop + step / 2, step))
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma list or start:stop:step, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# Shared helpers


def _estimator_options(args: argparse.Namespace, method: str, band: BandHz, n_window: int) -> LagWindow | EspritConfig | CombineConfig | None:
    if method == "bt_peak":
        return LagWindow.default_for(n_window, args.lag_window)
    if method == "esprit":
        return EspritConfig(cov_dim=args.cov_dim, model_order=args.model_order)
    if method == "combine":
        return CombineConfig(
            nominal_hz=band.center_hz,
            harmonic_count_za=args.harmonics,
            band_halfwidth_hz=band.width_hz / 2,
            lag_window_kind=args.lag_window,
        )
    return None


def _estimator_config(args: argparse.Namespace, band: BandHz, sample_rate_hz: float, window_s: float) -> EstimatorConfig:
    method = METHODS[args.method]
    return EstimatorConfig(
        method=method,
        window_s=window_s,
        hop_s=args.hop,
        band=band,
        nominal_hz=float(args.nominal),
        options=_estimator_options(args, method, band, round(window_s * sample_rate_hz)),
        grid_step_hz=args.grid_step,
    )


def _report(trace: EnfTrace) -> None:
    print(
        f"{len(trace)} points, mean {float(np.mean(trace.freqs_hz)):.6f} Hz, "
        f"std {1000 * float(np.std(trace.freqs_hz)):.3f} mHz, "
        f"mean confidence {float(np.mean(trace.confidence)):.3f}"
    )


def _audio_signal(args: argparse.Namespace) -> tuple[SampledSignal, BandHz, float | None]:
    """Selected channel, estimation band and alias context for an audio command."""
    recording = ingest.read_wav(args.wav)
    signal = ingest.select_channel(recording, args.channel, swap=args.swap_channels)
    source = args.source or ("flicker" if args.channel == "right" else "mains")
    nominal = float(args.nominal)
    if source == "flicker":
        band = args.band or BandHz.around(2 * nominal, 2 * DEFAULT_HALFWIDTH_HZ)
        alias_context: float | None = 2 * nominal
    else:
        band = args.band or BandHz.around(nominal, DEFAULT_HALFWIDTH_HZ)
        alias_context = None
    if args.filter_order:
        signal = filter_signal(signal, design_bandpass(FilterSpec(band=band, order_nu=args.filter_order), signal.sample_rate_hz))
    return signal, band, alias_context


def _video_signal(args: argparse.Namespace) -> tuple[SampledSignal, BandHz, float]:
    """SLIC region selection on a Y4M file; returns the unfiltered combined series."""
    order = args.filter_order or DEFAULT_FILTER_ORDER
    if order < 1 or order % 2 == 0:
        raise InputError(f"filter order must be a positive odd integer, got {order}")
    with open(args.y4m, "rb") as handle:
        reader = ingest.Y4mReader(handle)
        nominal = float(args.nominal)
        alias = alias_frequency(2 * nominal, reader.frame_rate_hz)
        if args.band is None and alias.f_alias_hz < MIN_ALIAS_HZ:
            raise EstimationError(
                f"{2 * nominal:g} Hz flicker aliases to {alias.f_alias_hz:.3f} Hz at {reader.frame_rate_hz} fps; "
                "the flicker is indistinguishable from DC"
            )
        band = args.band or BandHz.around(alias.f_alias_hz, DEFAULT_HALFWIDTH_HZ)
        logger.info("flicker %g Hz aliases to %.4f Hz (gamma %d); band %s", 2 * nominal, alias.f_alias_hz, alias.gamma, band)
        params = SlicParams(region_count_k=args.regions, compactness_m=args.compactness, iterations=args.iterations)
        labels, regions = video_region.segment_video(reader.video(), params)
        logger.info("%d frames, %d regions", reader.frames_read, labels.region_count_r)
    if args.label_map:
        video_region.write_label_pgm(labels, args.label_map)
    combined = video_region.select_regions(regions, band, args.top_k)
    return combined, band, 2 * nominal


# ---------------------------------------------------------------------------
# Commands


def cmd_extract_audio(args: argparse.Namespace) -> int:
    signal, band, alias_context = _audio_signal(args)
    config = _estimator_config(args, band, signal.sample_rate_hz, args.window)
    trace = estimate_enf(signal, config, alias_context)
    trace_io.write_trace_csv(trace, args.out)
    _report(trace)
    return EXIT_OK


def cmd_extract_video(args: argparse.Namespace) -> int:
    combined, band, alias_context = _video_signal(args)
    filt = design_bandpass(FilterSpec(band=band, order_nu=args.filter_order), combined.sample_rate_hz)
    config = _estimator_config(args, band, combined.sample_rate_hz, args.window)
    trace = estimate_enf(filter_signal(combined, filt), config, alias_context)
    trace_io.write_trace_csv(trace, args.out)
    _report(trace)
    return EXIT_OK


def cmd_match(args: argparse.Namespace) -> int:
    reference = trace_io.read_trace_csv(args.reference)
    query = trace_io.read_trace_csv(args.query)
    result = mcc(reference, query, args.max_lag, args.min_overlap)
    if args.out:
        trace_io.write_match_json(result, args.out)
    print(json.dumps({"mcc": result.mcc, "best_lag_s": result.best_lag_s, "overlap_s": result.overlap_s}))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    reference = trace_io.read_trace_csv(args.reference)
    query = trace_io.read_trace_csv(args.query)
    entries = duration_sweep(reference, query, args.durations, args.max_lag, args.min_overlap)
    trace_io.write_sweep_csv(entries, args.out)
    failed = sum(entry.failed for entry in entries)
    print(f"{len(entries)} durations, {failed} failed")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    model = EnfModel(nominal_hz=float(args.nominal), step_std_hz=args.step_std, max_dev_hz=args.max_dev, seed=args.seed)
    walk = synth.gen_enf_walk(model, args.duration, args.walk_rate)
    truth = synth.truth_trace(walk, args.truth_window, args.truth_hop if args.truth_window else None, nominal_hz=model.nominal_hz)
    trace_io.write_trace_csv(truth, args.truth)

    if args.wav:
        mains = synth.render_mains(walk, args.rate, synth.default_harmonic_amps(args.harmonics), args.snr_db, args.seed + 1)
        mains = synth.peak_normalize(mains)
        if args.stereo:
            light = synth.render_light(walk, args.rate, args.flicker_depth, args.light_snr_db, args.seed + 2)
            light = synth.peak_normalize(light)
            synth.write_wav([mains, light], args.wav)
        else:
            synth.write_wav(mains, args.wav)
        logger.info("wrote %s (%d samples at %g Hz)", args.wav, len(mains), args.rate)

    if args.y4m:
        width, height = args.size
        occluder = None
        if args.occluder:
            occluder = Occluder(size=args.occluder, velocity_px_s=(args.occluder_speed, 0.6 * args.occluder_speed))
        scene = SceneModel.uniform(width, height, luma=args.luma, flicker_depth=args.flicker_depth, noise_std=args.video_noise, occluder=occluder)
        video = synth.render_video(walk, scene, args.fps, args.duration, args.exposure, args.seed + 3)
        frames = synth.write_y4m(video, args.y4m)
        logger.info("wrote %s (%d frames at %s fps)", args.y4m, frames, args.fps)

    print(f"walk of {len(walk)} points, truth trace {args.truth}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    reference = trace_io.read_trace_csv(args.reference)
    if bool(args.wav) == bool(args.y4m):
        raise InputError("experiment needs exactly one of --wav or --y4m")

    if args.y4m:
        signal, band, alias_context = _video_signal(args)
        default_window = DEFAULT_WINDOW_VIDEO_S
    else:
        # Order sweeps apply their own filters.
        if args.kind == "orders":
            args.filter_order = None
        signal, band, alias_context = _audio_signal(args)
        default_window = DEFAULT_WINDOW_AUDIO_S
    window = args.window or default_window

    if args.kind == "segments":
        if args.y4m:
            order = args.filter_order or DEFAULT_FILTER_ORDER
            signal = filter_signal(signal, design_bandpass(FilterSpec(band=band, order_nu=order), signal.sample_rate_hz))
        config = _estimator_config(args, band, signal.sample_rate_hz, window)
        entries = experiments.segment_duration_sweep(reference, signal, config, args.windows, alias_context, args.max_lag, args.min_overlap)
    else:
        config = _estimator_config(args, band, signal.sample_rate_hz, window)
        entries = experiments.filter_order_sweep(reference, signal, band, args.orders, config, alias_context, args.max_lag, args.min_overlap)

    experiments.sweep_table(entries).to_csv(args.out, index=False, float_format=trace_io.FLOAT_FORMAT, lineterminator="\n")
    print(f"{len(entries)} settings, {sum(e.failed for e in entries)} failed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_estimator_flags(parser: argparse.ArgumentParser, default_method: str, default_window: float | None) -> None:
    parser.add_argument("--method", choices=sorted(METHODS), default=default_method, help="Per-segment estimator.")
    parser.add_argument("--nominal", type=int, choices=(50, 60), default=50, help="Nominal grid frequency in Hz.")
    parser.add_argument("--band", type=_band, default=None, help="Estimation band lo:hi in Hz (default derived from --nominal).")
    parser.add_argument("--window", type=float, default=default_window, help="Analysis window in seconds.")
    parser.add_argument("--hop", type=float, default=DEFAULT_HOP_S, help="Hop between windows in seconds.")
    parser.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP_HZ, help="Spectral grid spacing in Hz.")
    parser.add_argument("--harmonics", type=int, default=7, help="Harmonics combined by --method combine.")
    parser.add_argument("--cov-dim", type=int, default=10, help="ESPRIT covariance dimension.")
    parser.add_argument("--model-order", type=int, default=3, help="ESPRIT line-spectrum model order.")
    parser.add_argument("--lag-window", choices=LAG_WINDOW_KINDS, default="bartlett", help="Blackman-Tukey lag window.")


def _add_audio_input(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--wav", type=Path, required=required, help="PCM16 or float32 WAV recording.")
    parser.add_argument("--channel", choices=("left", "right", "mono"), default="left", help="left = mains, right = photodiode.")
    parser.add_argument("--swap-channels", action="store_true", help="Treat the right channel as left and vice versa.")
    parser.add_argument("--source", choices=("mains", "flicker"), default=None, help="Signal type (default: flicker for right, else mains).")


def _add_video_input(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--y4m", type=Path, required=required, help="YUV4MPEG2 video.")
    parser.add_argument("--regions", type=int, default=150, help="SLIC target superpixel count K.")
    parser.add_argument("--compactness", type=float, default=10.0, help="SLIC compactness m.")
    parser.add_argument("--iterations", type=int, default=10, help="SLIC iterations.")
    parser.add_argument("--top-k", type=int, default=video_region.DEFAULT_TOP_K, help="Regions combined by SNR weight.")
    parser.add_argument("--label-map", type=Path, default=None, help="Write the SLIC labels as a PGM image.")


def _add_match_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--reference", type=Path, required=True, help="Reference trace CSV.")
    parser.add_argument("--max-lag", type=float, default=0.0, help="Largest lag searched, in seconds.")
    parser.add_argument("--min-overlap", type=float, default=DEFAULT_MIN_OVERLAP, help="Minimum overlap as a fraction of the shorter trace.")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML preset file.")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging.")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only.")

    parser = argparse.ArgumentParser(prog="enf", description="Electric network frequency extraction and matching.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, help_text: str, func) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(
            name, help=help_text, parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        sub.set_defaults(func=func)
        commands[name] = sub
        return sub

    p_audio = add("extract-audio", "ENF trace from a mains or photodiode WAV.", cmd_extract_audio)
    _add_audio_input(p_audio, required=True)
    _add_estimator_flags(p_audio, "combine", DEFAULT_WINDOW_AUDIO_S)
    p_audio.add_argument("--filter-order", type=int, default=None, help="Optional bandpass order applied before estimation.")
    p_audio.add_argument("--out", type=Path, required=True, help="Trace CSV output.")

    p_video = add("extract-video", "ENF trace from a flickering-light video.", cmd_extract_video)
    _add_video_input(p_video, required=True)
    _add_estimator_flags(p_video, "stft", DEFAULT_WINDOW_VIDEO_S)
    p_video.add_argument("--filter-order", type=int, default=DEFAULT_FILTER_ORDER, help="Bandpass filter order (odd).")
    p_video.add_argument("--out", type=Path, required=True, help="Trace CSV output.")

    p_match = add("match", "Maximum correlation coefficient between two traces.", cmd_match)
    _add_match_flags(p_match)
    p_match.add_argument("--query", type=Path, required=True, help="Query trace CSV.")
    p_match.add_argument("--out", type=Path, default=None, help="Match JSON output (also printed).")

    p_sweep = add("sweep", "MCC of growing prefixes of the query trace.", cmd_sweep)
    _add_match_flags(p_sweep)
    p_sweep.add_argument("--query", type=Path, required=True, help="Query trace CSV.")
    p_sweep.add_argument("--durations", type=_float_list, required=True, help="Prefix durations: 60,120 or 60:480:60.")
    p_sweep.add_argument("--out", type=Path, required=True, help="Sweep CSV output.")

    p_synth = add("synth", "Synthetic recordings with a ground-truth trace.", cmd_synth)
    p_synth.add_argument("--duration", type=float, default=480.0, help="Seconds to synthesize.")
    p_synth.add_argument("--seed", type=int, default=0, help="Random seed.")
    p_synth.add_argument("--nominal", type=int, choices=(50, 60), default=50, help="Nominal grid frequency in Hz.")
    p_synth.add_argument("--step-std", type=float, default=0.002, help="ENF walk step std in Hz per sqrt(s).")
    p_synth.add_argument("--max-dev", type=float, default=0.1, help="ENF clamp half-width in Hz.")
    p_synth.add_argument("--walk-rate", type=float, default=1.0, help="ENF walk sample rate in Hz.")
    p_synth.add_argument("--truth", type=Path, required=True, help="Ground-truth trace CSV output.")
    p_synth.add_argument("--truth-window", type=float, default=None, help="Average the truth over this window (default: raw walk).")
    p_synth.add_argument("--truth-hop", type=float, default=DEFAULT_HOP_S, help="Hop of the averaged truth trace.")
    p_synth.add_argument("--wav", type=Path, default=None, help="Mains WAV output.")
    p_synth.add_argument("--rate", type=float, default=1000.0, help="WAV sample rate in Hz.")
    p_synth.add_argument("--harmonics", type=int, default=7, help="Mains harmonics with 1/z amplitudes.")
    p_synth.add_argument("--snr-db", type=float, default=20.0, help="Mains SNR in dB.")
    p_synth.add_argument("--stereo", action="store_true", help="Put a photodiode signal on the right channel.")
    p_synth.add_argument("--light-snr-db", type=float, default=30.0, help="Photodiode SNR in dB.")
    p_synth.add_argument("--flicker-depth", type=float, default=synth.DEFAULT_FLICKER_DEPTH, help="Light modulation index.")
    p_synth.add_argument("--y4m", type=Path, default=None, help="Flicker video output.")
    p_synth.add_argument("--fps", type=_fps, default=Fraction(30), help="Video frame rate, e.g. 30 or 30000/1001.")
    p_synth.add_argument("--size", type=_size, default=(64, 64), help="Video size WxH.")
    p_synth.add_argument("--luma", type=float, default=160.0, help="Scene base luma.")
    p_synth.add_argument("--video-noise", type=float, default=2.0, help="Per-pixel luma noise std.")
    p_synth.add_argument("--exposure", type=float, default=synth.DEFAULT_EXPOSURE_FRACTION, help="Exposure as a fraction of the frame period.")
    p_synth.add_argument("--occluder", type=_size, default=None, help="Moving dark rectangle WxH.")
    p_synth.add_argument("--occluder-speed", type=float, default=4.0, help="Occluder speed in px/s.")

    p_exp = add("experiment", "Window-length or filter-order sweeps against a reference trace.", cmd_experiment)
    p_exp.add_argument("kind", choices=("segments", "orders"), help="segments: analysis windows; orders: filter orders.")
    _add_match_flags(p_exp)
    _add_audio_input(p_exp, required=False)
    _add_video_input(p_exp, required=False)
    _add_estimator_flags(p_exp, "stft", None)
    p_exp.add_argument("--filter-order", type=int, default=None, help="Bandpass order for segment sweeps (video default 111, audio unfiltered).")
    p_exp.add_argument("--windows", type=_float_list, default=list(experiments.DEFAULT_SEGMENT_WINDOWS_S), help="Analysis windows in seconds.")
    p_exp.add_argument("--orders", type=_int_list, default=list(experiments.SWEEP_FILTER_ORDERS), help="Filter orders.")
    p_exp.add_argument("--out", type=Path, required=True, help="Sweep CSV output.")

    return parser, commands


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", type=Path, default=None)
        known, _ = pre.parse_known_args(argv)
        if known.config is not None:
            apply_presets(commands, load_presets(known.config))
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (InputError, OSError) as exc:
        logging.basicConfig(format="%(levelname)s %(message)s")
        logger.error("%s", exc)
        return EXIT_INPUT

    _configure_logging(args)
    try:
        return int(args.func(args))
    except KeyboardInterrupt:
        return EXIT_INTERRUPTED
    except (InputError, ParseError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except (EstimationError, MatchError) as exc:
        logger.error("%s", exc)
        return EXIT_ESTIMATION
    except EnfError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
