from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, NamedTuple

import numpy as np

from enf_tools.errors import InputError

AnalysisWindow = Literal["hann", "hamming", "blackman", "rectangular"]
LagWindowKind = Literal["rectangular", "bartlett", "hamming", "hann"]
EstimatorMethod = Literal["stft_peak", "bt_peak", "esprit", "combine"]

LAG_WINDOW_KINDS = ("rectangular", "bartlett", "hamming", "hann")
ESTIMATOR_METHODS = ("stft_peak", "bt_peak", "esprit", "combine")


def _frozen_array(values: object, dtype: type = np.float64) -> np.ndarray:
    """Copy into a read-only 1-D array so shared instances cannot be mutated."""
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BandHz:
    low_hz: float
    high_hz: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "low_hz", float(self.low_hz))
        object.__setattr__(self, "high_hz", float(self.high_hz))
        if not self.low_hz < self.high_hz:
            raise InputError(f"band low edge {self.low_hz} must be below high edge {self.high_hz}")

    @classmethod
    def around(cls, center_hz: float, halfwidth_hz: float) -> BandHz:
        return cls(center_hz - halfwidth_hz, center_hz + halfwidth_hz)

    @classmethod
    def parse(cls, text: str) -> BandHz:
        """Parse the CLI form ``lo:hi``."""
        try:
            low, high = (float(part) for part in text.split(":"))
        except ValueError as exc:
            raise InputError(f"band must look like lo:hi, got {text!r}") from exc
        return cls(low, high)

    @property
    def width_hz(self) -> float:
        return self.high_hz - self.low_hz

    @property
    def center_hz(self) -> float:
        return 0.5 * (self.low_hz + self.high_hz)

    def contains(self, other: BandHz) -> bool:
        return self.low_hz <= other.low_hz and other.high_hz <= self.high_hz

    def inside_nyquist(self, sample_rate_hz: float) -> bool:
        return self.low_hz > 0 and self.high_hz < sample_rate_hz / 2

    def __str__(self) -> str:
        return f"[{self.low_hz:g}, {self.high_hz:g}] Hz"


@dataclass(frozen=True, eq=False)
class SampledSignal:
    samples: np.ndarray
    sample_rate_hz: float
    label: str | None = None
    # Samples at each end that carry a filter transient.
    tainted_edge_samples: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _frozen_array(self.samples))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        if not self.sample_rate_hz > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.tainted_edge_samples < 0:
            raise InputError("tainted_edge_samples must be nonnegative")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray, *, tainted_edge_samples: int | None = None) -> SampledSignal:
        return SampledSignal(
            samples=samples,
            sample_rate_hz=self.sample_rate_hz,
            label=self.label,
            tainted_edge_samples=self.tainted_edge_samples if tainted_edge_samples is None else tainted_edge_samples,
        )

    def require_samples(self) -> None:
        if self.samples.size == 0:
            raise InputError(f"signal {self.label or '<unlabelled>'} has no samples")


@dataclass(frozen=True, eq=False)
class EnfTrace:
    nominal_hz: float
    window_s: float
    hop_s: float
    times_s: np.ndarray
    freqs_hz: np.ndarray
    confidence: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "times_s", _frozen_array(self.times_s))
        object.__setattr__(self, "freqs_hz", _frozen_array(self.freqs_hz))
        object.__setattr__(self, "confidence", _frozen_array(self.confidence))
        if not (self.window_s > 0 and self.hop_s > 0):
            raise InputError("trace window and hop must be positive")
        n = self.times_s.size
        if self.freqs_hz.size != n or self.confidence.size != n:
            raise InputError("trace columns must have equal length")
        if n > 1:
            spacing = np.diff(self.times_s)
            if np.any(np.abs(spacing - self.hop_s) > 1e-9 * max(self.hop_s, 1.0)):
                raise InputError(f"trace times must increase by the hop ({self.hop_s} s)")
        if np.any((self.confidence < 0) | (self.confidence > 1)):
            raise InputError("trace confidence must lie in [0, 1]")
        off_nominal = np.abs(self.freqs_hz - self.nominal_hz) > 1.0
        if np.any(off_nominal & (self.confidence != 0)):
            raise InputError("trace points more than 1 Hz from nominal must carry confidence 0")

    def __len__(self) -> int:
        return int(self.times_s.size)

    @property
    def points(self) -> np.ndarray:
        """(time_s, freq_hz, confidence) rows."""
        return np.column_stack([self.times_s, self.freqs_hz, self.confidence])

    @property
    def duration_s(self) -> float:
        return len(self) * self.hop_s

    def with_points(self, times_s: np.ndarray, freqs_hz: np.ndarray, confidence: np.ndarray) -> EnfTrace:
        return EnfTrace(self.nominal_hz, self.window_s, self.hop_s, times_s, freqs_hz, confidence)


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    freq_start_hz: float
    freq_step_hz: float
    power: np.ndarray
    # Negative leakage was set to zero.
    clipped: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "power", _frozen_array(self.power))
        if not self.freq_step_hz > 0:
            raise InputError("spectrum frequency step must be positive")
        if np.any(self.power < 0):
            raise InputError("spectrum power must be nonnegative")

    def __len__(self) -> int:
        return int(self.power.size)

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.freq_start_hz + self.freq_step_hz * np.arange(self.power.size)

    @property
    def band(self) -> BandHz:
        return BandHz(self.freq_start_hz, self.freq_start_hz + self.freq_step_hz * max(self.power.size - 1, 1))


class PeakEstimate(NamedTuple):
    freq_hz: float
    on_edge: bool


class SnrEstimate(NamedTuple):
    ratio: float
    capped: bool


@dataclass(frozen=True)
class StereoRecording:
    left: SampledSignal
    right: SampledSignal
    sample_rate_hz: float

    def __post_init__(self) -> None:
        if len(self.left) != len(self.right):
            raise InputError("stereo channels must have equal length")
        if not (self.left.sample_rate_hz == self.right.sample_rate_hz == float(self.sample_rate_hz)):
            raise InputError("stereo channels must share the recording sample rate")

    def swapped(self) -> StereoRecording:
        return StereoRecording(left=self.right, right=self.left, sample_rate_hz=self.sample_rate_hz)


@dataclass(frozen=True, eq=False)
class VideoLuma:
    width: int
    height: int
    frame_rate_hz: Fraction
    # One pass only when produced by a stream parser.
    frames: Iterable[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise InputError("video dimensions must be positive")
        rate = self.frame_rate_hz if isinstance(self.frame_rate_hz, Fraction) else Fraction(self.frame_rate_hz)
        if rate <= 0:
            raise InputError("frame rate must be positive")
        object.__setattr__(self, "frame_rate_hz", rate)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def iter_frames(self) -> Iterator[np.ndarray]:
        for index, frame in enumerate(self.frames):
            if frame.shape != self.shape:
                raise InputError(f"frame {index} has shape {frame.shape}, expected {self.shape}")
            yield frame


@dataclass(frozen=True)
class SlicParams:
    region_count_k: int = 150
    compactness_m: float = 10.0
    iterations: int = 10

    def __post_init__(self) -> None:
        if self.region_count_k < 1:
            raise InputError("region count K must be at least 1")
        if not self.compactness_m > 0:
            raise InputError("compactness must be positive")
        if self.iterations < 1:
            raise InputError("SLIC needs at least one iteration")


@dataclass(frozen=True, eq=False)
class LabelMap:
    width: int
    height: int
    labels: np.ndarray
    region_count_r: int

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.size != self.width * self.height:
            raise InputError("label map size must equal width x height")
        if self.region_count_r < 1 or labels.min() < 0 or labels.max() >= self.region_count_r:
            raise InputError("labels must lie in 0..R-1")
        if np.any(np.bincount(labels, minlength=self.region_count_r) == 0):
            raise InputError("every region id must occur at least once")

    def as_grid(self) -> np.ndarray:
        return self.labels.reshape(self.height, self.width)

    def pixel_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.region_count_r)


@dataclass(frozen=True)
class RegionSeries:
    region_id: int
    centroid: tuple[float, float]
    pixel_count: int
    series: SampledSignal


@dataclass(frozen=True)
class LagWindow:
    kind: LagWindowKind = "bartlett"
    half_length_m: int = 1

    def __post_init__(self) -> None:
        if self.kind not in LAG_WINDOW_KINDS:
            raise InputError(f"unknown lag window {self.kind!r}")
        if self.half_length_m < 1:
            raise InputError("lag window half length M must be positive")

    @classmethod
    def default_for(cls, n_samples: int, kind: LagWindowKind = "bartlett") -> LagWindow:
        """Bartlett with M = N/4."""
        return cls(kind=kind, half_length_m=max(1, n_samples // 4))


@dataclass(frozen=True)
class EspritConfig:
    cov_dim: int = 10
    model_order: int = 3

    def __post_init__(self) -> None:
        if self.cov_dim < 2 or self.model_order < 1:
            raise InputError("ESPRIT needs cov_dim >= 2 and model_order >= 1")
        if not self.model_order < self.cov_dim:
            raise InputError("ESPRIT model order must be below the covariance dimension")


@dataclass(frozen=True)
class CombineConfig:
    nominal_hz: float = 50.0
    harmonic_count_za: int = 7
    band_halfwidth_hz: float = 0.1
    lag_window_kind: LagWindowKind = "bartlett"

    def __post_init__(self) -> None:
        if self.harmonic_count_za < 1:
            raise InputError("at least one harmonic is required")
        if not self.band_halfwidth_hz > 0:
            raise InputError("band half width must be positive")
        if self.lag_window_kind not in LAG_WINDOW_KINDS:
            raise InputError(f"unknown lag window {self.lag_window_kind!r}")

    @property
    def base_band(self) -> BandHz:
        return BandHz.around(self.nominal_hz, self.band_halfwidth_hz)


@dataclass(frozen=True)
class AliasResult:
    gamma: int
    f_alias_hz: float


@dataclass(frozen=True)
class FilterSpec:
    band: BandHz
    order_nu: int
    design: Literal["windowed-sinc-hamming"] = "windowed-sinc-hamming"

    def __post_init__(self) -> None:
        if self.order_nu < 1 or self.order_nu % 2 == 0:
            raise InputError(f"filter order must be a positive odd integer, got {self.order_nu}")


@dataclass(frozen=True, eq=False)
class BandpassFilter:
    spec: FilterSpec
    sample_rate_hz: float
    coeffs: np.ndarray
    # Pass band narrower than the order can resolve.
    too_narrow: bool = False

    @property
    def group_delay_samples(self) -> int:
        return (self.spec.order_nu - 1) // 2


@dataclass(frozen=True)
class EstimatorConfig:
    method: EstimatorMethod
    window_s: float
    hop_s: float
    band: BandHz
    nominal_hz: float = 50.0
    options: LagWindow | EspritConfig | CombineConfig | None = None
    grid_step_hz: float = 0.001
    analysis_window: AnalysisWindow = "hann"

    def __post_init__(self) -> None:
        if self.method not in ESTIMATOR_METHODS:
            raise InputError(f"unknown estimator method {self.method!r}")
        if not (self.window_s > 0 and self.hop_s > 0):
            raise InputError("window and hop must be positive")
        if self.hop_s > self.window_s:
            raise InputError("hop must not exceed the window")
        if not self.grid_step_hz > 0:
            raise InputError("grid step must be positive")
        expected = {
            "bt_peak": LagWindow,
            "esprit": EspritConfig,
            "combine": CombineConfig,
        }.get(self.method)
        if self.options is not None and (expected is None or not isinstance(self.options, expected)):
            raise InputError(f"{type(self.options).__name__} does not configure method {self.method}")


@dataclass(frozen=True, eq=False)
class MatchResult:
    mcc: float
    best_lag_s: float
    overlap_s: float
    # (lag_s, correlation) rows ordered by lag.
    curve: np.ndarray

    def to_json_dict(self) -> dict[str, object]:
        return {
            "mcc": float(self.mcc),
            "best_lag_s": float(self.best_lag_s),
            "overlap_s": float(self.overlap_s),
            "curve": [[float(lag), float(r)] for lag, r in self.curve],
        }


@dataclass(frozen=True)
class SweepEntry:
    parameter: float
    result: MatchResult | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.result is None


@dataclass(frozen=True)
class EnfModel:
    nominal_hz: float = 50.0
    step_std_hz: float = 0.002
    max_dev_hz: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.step_std_hz < 0:
            raise InputError("random-walk step std must be nonnegative")
        if not self.max_dev_hz > 0:
            raise InputError("max deviation must be positive")


@dataclass(frozen=True)
class Occluder:
    size: tuple[int, int]
    start: tuple[float, float] = (0.0, 0.0)
    velocity_px_s: tuple[float, float] = (4.0, 0.0)
    luma: float = 8.0


@dataclass(frozen=True, eq=False)
class SceneModel:
    width: int
    height: int
    base_luma: np.ndarray
    flicker_depth: float = 0.1
    noise_std: float = 0.0
    occluder: Occluder | None = None

    def __post_init__(self) -> None:
        base = np.broadcast_to(np.asarray(self.base_luma, dtype=np.float64), (self.height, self.width)).copy()
        base.setflags(write=False)
        object.__setattr__(self, "base_luma", base)
        if not 0 <= self.flicker_depth <= 1:
            raise InputError("flicker depth must lie in [0, 1]")
        if self.noise_std < 0:
            raise InputError("noise std must be nonnegative")

    @classmethod
    def uniform(cls, width: int, height: int, luma: float = 160.0, **kwargs: object) -> SceneModel:
        return cls(width=width, height=height, base_luma=np.full((height, width), luma), **kwargs)  # type: ignore[arg-type]
