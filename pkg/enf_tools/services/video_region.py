"""Superpixel segmentation of a keyframe and per-region luminance series."""

from __future__ import annotations

import itertools
import logging
import math
from pathlib import Path

import numpy as np
from scipy import ndimage

from enf_tools.errors import InputError, NoUsableRegionError
from enf_tools.models import BandHz, LabelMap, RegionSeries, SampledSignal, SlicParams, VideoLuma
from enf_tools.services.spectral import in_band_snr

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5


def _grid_shape(width: int, height: int, region_count_k: int) -> tuple[int, int]:
    """Columns and rows of the seed grid, at most ``region_count_k`` seeds in total."""
    ideal = math.sqrt(region_count_k * width / height)
    best = (0, 0)
    # Ties go to more columns.
    for guess in (math.ceil(ideal), math.floor(ideal)):
        nx = max(1, min(width, region_count_k, guess))
        ny = max(1, min(height, region_count_k // nx))
        if nx * ny > best[0] * best[1]:
            best = (nx, ny)
    return best


def _seed_centers(image: np.ndarray, region_count_k: int) -> np.ndarray:
    """Regular grid of (intensity, x, y) centers, pixel-centered, no perturbation."""
    height, width = image.shape
    nx, ny = _grid_shape(width, height, region_count_k)
    xs = (np.arange(nx) + 0.5) * width / nx - 0.5
    ys = (np.arange(ny) + 0.5) * height / ny - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    cx = grid_x.ravel()
    cy = grid_y.ravel()
    rows = np.clip(np.floor(cy + 0.5).astype(int), 0, height - 1)
    cols = np.clip(np.floor(cx + 0.5).astype(int), 0, width - 1)
    return np.column_stack([image[rows, cols], cx, cy])


def _assign(image: np.ndarray, centers: np.ndarray, spatial_weight: float, reach: int) -> tuple[np.ndarray, np.ndarray]:
    height, width = image.shape
    labels = np.full(image.shape, -1, dtype=np.int64)
    distance = np.full(image.shape, np.inf)
    for index, (intensity, cx, cy) in enumerate(centers):
        y0, y1 = max(0, int(cy) - reach), min(height, int(cy) + reach + 2)
        x0, x1 = max(0, int(cx) - reach), min(width, int(cx) + reach + 2)
        ys, xs = np.mgrid[y0:y1, x0:x1]
        d2 = (image[y0:y1, x0:x1] - intensity) ** 2 + spatial_weight * ((xs - cx) ** 2 + (ys - cy) ** 2)
        window_dist = distance[y0:y1, x0:x1]
        closer = d2 < window_dist
        window_dist[closer] = d2[closer]
        labels[y0:y1, x0:x1][closer] = index
    return labels, distance


def _assign_leftovers(image: np.ndarray, labels: np.ndarray, centers: np.ndarray, spatial_weight: float) -> None:
    rows, cols = np.nonzero(labels < 0)
    if rows.size == 0:
        return
    d2 = (image[rows, cols][:, None] - centers[None, :, 0]) ** 2 + spatial_weight * (
        (cols[:, None] - centers[None, :, 1]) ** 2 + (rows[:, None] - centers[None, :, 2]) ** 2
    )
    labels[rows, cols] = np.argmin(d2, axis=1)


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Keep each label's largest 4-connected piece; merge the other pieces into their largest neighbour."""
    final = np.full(labels.shape, -1, dtype=np.int64)
    orphans: list[tuple[tuple[slice, slice], np.ndarray]] = []
    height, width = labels.shape
    for label in np.unique(labels):
        pieces, count = ndimage.label(labels == label)
        sizes = np.bincount(pieces.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        final[pieces == keep] = label
        for piece, box in enumerate(ndimage.find_objects(pieces), start=1):
            if piece == keep or box is None:
                continue
            # Grow the box by one pixel so the neighbour ring is visible.
            grown = (
                slice(max(0, box[0].start - 1), min(height, box[0].stop + 1)),
                slice(max(0, box[1].start - 1), min(width, box[1].stop + 1)),
            )
            orphans.append((grown, pieces[grown] == piece))

    region_sizes = np.bincount(final[final >= 0], minlength=int(labels.max()) + 1)
    pending = orphans
    while pending:
        deferred = []
        for box, mask in pending:
            ring = ndimage.binary_dilation(mask) & ~mask
            neighbours = final[box][ring]
            neighbours = np.unique(neighbours[neighbours >= 0])
            if neighbours.size == 0:
                deferred.append((box, mask))
                continue
            target = max(neighbours, key=lambda r: (region_sizes[r], -r))
            final[box][mask] = target
            region_sizes[target] += int(mask.sum())
        if len(deferred) == len(pending):
            raise RuntimeError("orphan superpixel fragments have no labelled neighbour")
        pending = deferred

    _, compact = np.unique(final, return_inverse=True)
    return compact.reshape(labels.shape)


def slic_segment(keyframe: np.ndarray, params: SlicParams) -> LabelMap:
    """SLIC superpixels on luma only.

    Clustering runs in (intensity, x, y) with d^2 = dI^2 + (m / S)^2 dxy^2,
    S = sqrt(W * H / K), searching a 2S box around every center. Seeding is a
    fixed grid, so the result is a pure function of the inputs.
    """
    image = np.asarray(keyframe, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] < 2 or image.shape[1] < 2:
        raise InputError(f"keyframe must be a 2-D plane of at least 2x2 pixels, got shape {image.shape}")
    height, width = image.shape
    k = params.region_count_k
    if k > width * height:
        raise InputError(f"K={k} exceeds the {width * height} pixels of the keyframe")

    step = math.sqrt(width * height / k)
    spatial_weight = (params.compactness_m / step) ** 2
    reach = math.ceil(2 * step)
    centers = _seed_centers(image, k)
    ys, xs = np.mgrid[0:height, 0:width]

    labels = np.zeros(image.shape, dtype=np.int64)
    for _ in range(params.iterations):
        labels, _distance = _assign(image, centers, spatial_weight, reach)
        _assign_leftovers(image, labels, centers, spatial_weight)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers))
        occupied = counts > 0
        for column, values in enumerate((image, xs, ys)):
            sums = np.bincount(flat, weights=values.ravel().astype(np.float64), minlength=len(centers))
            centers[occupied, column] = sums[occupied] / counts[occupied]

    connected = _enforce_connectivity(labels)
    region_count = int(connected.max()) + 1
    logger.debug("SLIC: K=%d gave %d connected regions on %dx%d", k, region_count, width, height)
    return LabelMap(width=width, height=height, labels=connected.ravel(), region_count_r=region_count)


def region_time_series(video: VideoLuma, labels: LabelMap) -> list[RegionSeries]:
    """Mean luma of every region in every frame, with labels fixed across frames."""
    if (video.width, video.height) != (labels.width, labels.height):
        raise InputError(
            f"label map is {labels.width}x{labels.height} but video frames are {video.width}x{video.height}"
        )
    flat = labels.labels
    counts = labels.pixel_counts()
    rows = [np.bincount(flat, weights=frame.ravel().astype(np.float64), minlength=labels.region_count_r) / counts for frame in video.iter_frames()]
    if not rows:
        raise InputError("video has no frames")
    means = np.vstack(rows)

    ys, xs = np.divmod(np.arange(flat.size), labels.width)
    cx = np.bincount(flat, weights=xs.astype(np.float64), minlength=labels.region_count_r) / counts
    cy = np.bincount(flat, weights=ys.astype(np.float64), minlength=labels.region_count_r) / counts
    rate = float(video.frame_rate_hz)
    return [
        RegionSeries(
            region_id=region,
            centroid=(float(cx[region]), float(cy[region])),
            pixel_count=int(counts[region]),
            series=SampledSignal(means[:, region], rate, label=f"region-{region}"),
        )
        for region in range(labels.region_count_r)
    ]


def segment_video(video: VideoLuma, params: SlicParams) -> tuple[LabelMap, list[RegionSeries]]:
    """Segment the first frame, then stream every frame through the fixed labels."""
    frames = video.iter_frames()
    try:
        keyframe = next(frames)
    except StopIteration:
        raise InputError("video has no frames") from None
    labels = slic_segment(keyframe, params)
    replay = VideoLuma(
        width=video.width,
        height=video.height,
        frame_rate_hz=video.frame_rate_hz,
        frames=itertools.chain([keyframe], frames),
    )
    return labels, region_time_series(replay, labels)


def select_regions(regions: list[RegionSeries], band: BandHz, top_k: int = DEFAULT_TOP_K) -> SampledSignal:
    """SNR-weighted average of the ``top_k`` regions with the most in-band power.

    Each series is mean-removed and scaled to unit variance first; constant
    series carry no usable flicker and are skipped.
    """
    if not regions:
        raise InputError("no regions to select from")
    if top_k < 1:
        raise InputError("top_k must be at least 1")
    first = regions[0].series
    if any(len(r.series) != len(first) or r.series.sample_rate_hz != first.sample_rate_hz for r in regions):
        raise InputError("region series must share length and sample rate")
    if not band.inside_nyquist(first.sample_rate_hz):
        raise InputError(f"band {band} lies outside (0, {first.sample_rate_hz / 2:g}) Hz")

    scored: list[tuple[float, int, np.ndarray]] = []
    for order, region in enumerate(regions):
        centered = region.series.samples - region.series.samples.mean()
        spread = centered.std()
        if not np.isfinite(spread) or spread == 0:
            logger.debug("region %d is constant; skipped", region.region_id)
            continue
        unit = centered / spread
        snr = in_band_snr(region.series.with_samples(unit), band)
        if np.isfinite(snr):
            scored.append((snr, order, unit))
    if not scored:
        raise NoUsableRegionError(f"no region has a finite in-band SNR over {band}")

    scored.sort(key=lambda item: (-item[0], item[1]))
    chosen = scored[:top_k]
    snrs = np.array([snr for snr, _, _ in chosen])
    weights = snrs / snrs.sum() if snrs.sum() > 0 else np.full(snrs.size, 1.0 / snrs.size)
    combined = np.zeros(len(first))
    for weight, (_, _, unit) in zip(weights, chosen, strict=True):
        combined += weight * unit
    combined -= combined.mean()
    spread = combined.std()
    if spread == 0:
        raise NoUsableRegionError("selected regions cancel out")
    logger.info(
        "selected regions %s (SNR %s)",
        [regions[order].region_id for _, order, _ in chosen],
        ", ".join(f"{snr:.3g}" for snr in snrs),
    )
    return SampledSignal(combined / spread, first.sample_rate_hz, label="video-regions")


def write_label_pgm(labels: LabelMap, path: str | Path) -> None:
    """Binary PGM of the label map, gray level = region id mod 256."""
    header = f"P5\n{labels.width} {labels.height}\n255\n".encode("ascii")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write((labels.labels % 256).astype(np.uint8).tobytes())
