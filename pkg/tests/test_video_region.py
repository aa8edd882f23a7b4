from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from scipy import ndimage

from enf_tools.errors import InputError, NoUsableRegionError
from enf_tools.models import BandHz, EnfModel, LabelMap, RegionSeries, SampledSignal, SceneModel, SlicParams, VideoLuma
from enf_tools.services import synth, video_region
from enf_tools.services.spectral import in_band_snr
from tests.helpers import tone

FLICKER_BAND = BandHz(9.9, 10.1)


def _region(region_id: int, samples: np.ndarray, rate: float = 30.0) -> RegionSeries:
    return RegionSeries(region_id=region_id, centroid=(0.0, 0.0), pixel_count=1, series=SampledSignal(samples, rate))


def _unit(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean()
    return centered / centered.std()


def test_constant_frame_splits_into_quadrants():
    labels = video_region.slic_segment(np.full((8, 8), 100.0), SlicParams(region_count_k=4, compactness_m=10, iterations=10))
    assert labels.region_count_r == 4
    np.testing.assert_array_equal(labels.pixel_counts(), [16, 16, 16, 16])
    grid = labels.as_grid()
    for quadrant in (grid[:4, :4], grid[:4, 4:], grid[4:, :4], grid[4:, 4:]):
        assert np.unique(quadrant).size == 1
    assert np.unique([grid[0, 0], grid[0, 7], grid[7, 0], grid[7, 7]]).size == 4


def test_single_region_covers_the_frame():
    frame = np.random.default_rng(0).integers(0, 256, size=(6, 9))
    labels = video_region.slic_segment(frame, SlicParams(region_count_k=1))
    assert labels.region_count_r == 1
    assert not labels.labels.any()


def test_single_region_on_a_strip():
    labels = video_region.slic_segment(np.full((2, 100), 128.0), SlicParams(region_count_k=1))
    assert labels.region_count_r == 1


@pytest.mark.parametrize(("shape", "k"), [((2, 200), 2), ((2, 100), 3), ((6, 9), 1), ((12, 16), 5), ((40, 7), 4)])
def test_region_count_stays_within_twice_k(shape, k):
    frame = np.random.default_rng(3).normal(128, 20, size=shape)
    labels = video_region.slic_segment(frame, SlicParams(region_count_k=k))
    assert 1 <= labels.region_count_r <= 2 * k
    nx, ny = video_region._grid_shape(shape[1], shape[0], k)
    assert nx * ny <= k


def test_intensity_edge_splits_the_regions():
    frame = np.zeros((8, 8))
    frame[:, 4:] = 255
    grid = video_region.slic_segment(frame, SlicParams(region_count_k=2)).as_grid()
    assert np.unique(grid[:, :4]).size == 1
    assert np.unique(grid[:, 4:]).size == 1
    assert grid[0, 0] != grid[0, 7]


def test_slic_is_deterministic_and_connected():
    frame = np.random.default_rng(5).normal(128, 30, size=(32, 40))
    first = video_region.slic_segment(frame, SlicParams(region_count_k=20))
    second = video_region.slic_segment(frame, SlicParams(region_count_k=20))
    np.testing.assert_array_equal(first.labels, second.labels)
    grid = first.as_grid()
    for region in range(first.region_count_r):
        _, pieces = ndimage.label(grid == region)
        assert pieces == 1


def test_slic_rejects_more_regions_than_pixels():
    with pytest.raises(InputError):
        video_region.slic_segment(np.zeros((3, 3)), SlicParams(region_count_k=10))


def test_region_means_per_frame():
    frames = [np.array([[10, 10], [20, 20]], dtype=np.uint8), np.zeros((2, 2), dtype=np.uint8)]
    video = VideoLuma(width=2, height=2, frame_rate_hz=Fraction(30), frames=frames)
    labels = LabelMap(width=2, height=2, labels=np.zeros(4), region_count_r=1)
    [series] = video_region.region_time_series(video, labels)
    np.testing.assert_array_equal(series.series.samples, [15.0, 0.0])
    assert series.pixel_count == 4
    assert series.centroid == (0.5, 0.5)


def test_checkerboard_regions_share_the_flicker():
    t = np.arange(60) / 30.0
    levels = 100 * (1 + 0.1 * np.cos(2 * np.pi * 10.0 * t))
    frames = [np.full((4, 4), level) for level in levels]
    video = VideoLuma(width=4, height=4, frame_rate_hz=Fraction(30), frames=frames)
    ys, xs = np.mgrid[0:4, 0:4]
    labels = LabelMap(width=4, height=4, labels=((xs + ys) % 2).ravel(), region_count_r=2)
    black, white = video_region.region_time_series(video, labels)
    np.testing.assert_allclose(black.series.samples, white.series.samples)
    np.testing.assert_allclose(black.series.samples, levels)


def test_region_series_rejects_mismatched_labels():
    video = VideoLuma(width=4, height=4, frame_rate_hz=Fraction(30), frames=[np.zeros((4, 4))])
    with pytest.raises(InputError):
        video_region.region_time_series(video, LabelMap(width=2, height=2, labels=np.zeros(4), region_count_r=1))


def test_segment_video_on_rendered_flicker():
    walk = synth.gen_enf_walk(EnfModel(step_std_hz=0.0), 10.0, 1.0)
    video = synth.render_video(walk, SceneModel.uniform(16, 12, noise_std=1.0), Fraction(30), 10.0)
    labels, regions = video_region.segment_video(video, SlicParams(region_count_k=6))
    assert len(regions) == labels.region_count_r
    assert sum(region.pixel_count for region in regions) == 16 * 12
    assert all(len(region.series) == 300 for region in regions)


def test_top_one_picks_the_flickering_region():
    rng = np.random.default_rng(1)
    flicker = tone(10.0, 30.0, 60.0).samples
    regions = [_region(0, rng.normal(size=1800)), _region(1, 3 * flicker + 7), _region(2, rng.normal(size=1800))]
    combined = video_region.select_regions(regions, FLICKER_BAND, top_k=1)
    np.testing.assert_allclose(combined.samples, _unit(flicker), atol=1e-9)


def test_identical_regions_combine_to_one_of_them():
    series = tone(10.0, 30.0, 60.0, noise_std=0.5).samples
    regions = [_region(i, series) for i in range(4)]
    np.testing.assert_allclose(video_region.select_regions(regions, FLICKER_BAND, top_k=3).samples, _unit(series), atol=1e-9)


def test_constant_regions_are_skipped():
    flicker = tone(10.0, 30.0, 60.0).samples
    combined = video_region.select_regions([_region(0, np.full(1800, 4.0)), _region(1, flicker)], FLICKER_BAND, top_k=2)
    np.testing.assert_allclose(combined.samples, _unit(flicker), atol=1e-9)
    with pytest.raises(NoUsableRegionError):
        video_region.select_regions([_region(0, np.full(1800, 4.0))], FLICKER_BAND)


def test_weighting_keeps_the_strong_region_snr():
    ratios = []
    for seed in range(30):
        rng = np.random.default_rng(seed)
        clean = tone(10.04, 30.0, 60.0).samples
        strong = clean + rng.normal(0.0, np.sqrt(0.005), clean.size)
        weak = clean + rng.normal(0.0, np.sqrt(0.5), clean.size)
        combined = video_region.select_regions([_region(0, weak), _region(1, strong)], FLICKER_BAND, top_k=2)
        best = max(in_band_snr(SampledSignal(_unit(x), 30.0), FLICKER_BAND) for x in (strong, weak))
        ratios.append(in_band_snr(combined, FLICKER_BAND) / best)
    assert np.median(ratios) >= 0.9


def test_select_regions_validates_inputs():
    with pytest.raises(InputError):
        video_region.select_regions([], FLICKER_BAND)
    with pytest.raises(InputError):
        video_region.select_regions([_region(0, np.ones(10)), _region(1, np.ones(12))], FLICKER_BAND)
    with pytest.raises(InputError):
        video_region.select_regions([_region(0, np.ones(10))], BandHz(14.0, 16.0))


def test_label_pgm(tmp_path):
    labels = LabelMap(width=3, height=2, labels=[0, 1, 2, 0, 1, 2], region_count_r=3)
    path = tmp_path / "labels.pgm"
    video_region.write_label_pgm(labels, path)
    assert path.read_bytes() == b"P5\n3 2\n255\n" + bytes([0, 1, 2, 0, 1, 2])
