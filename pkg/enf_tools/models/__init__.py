from .types import (
    ESTIMATOR_METHODS,
    LAG_WINDOW_KINDS,
    AliasResult,
    BandHz,
    BandpassFilter,
    CombineConfig,
    EnfModel,
    EnfTrace,
    EspritConfig,
    EstimatorConfig,
    FilterSpec,
    LabelMap,
    LagWindow,
    MatchResult,
    Occluder,
    PeakEstimate,
    RegionSeries,
    SampledSignal,
    SceneModel,
    SlicParams,
    SnrEstimate,
    SpectrumEstimate,
    StereoRecording,
    SweepEntry,
    VideoLuma,
)

__all__ = [
    "ESTIMATOR_METHODS",
    "LAG_WINDOW_KINDS",
    "AliasResult",
    "BandHz",
    "BandpassFilter",
    "CombineConfig",
    "EnfModel",
    "EnfTrace",
    "EspritConfig",
    "EstimatorConfig",
    "FilterSpec",
    "LabelMap",
    "LagWindow",
    "MatchResult",
    "Occluder",
    "PeakEstimate",
    "RegionSeries",
    "SampledSignal",
    "SceneModel",
    "SlicParams",
    "SnrEstimate",
    "SpectrumEstimate",
    "StereoRecording",
    "SweepEntry",
    "VideoLuma",
]
