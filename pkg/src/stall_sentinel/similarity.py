"""SSIM evidence over a candidate ROI and anomaly onset backtracking.

The evidence e_t compares the ROI crop of frame t against the same crop of
the reference frame (the frame where the candidate was first detected). On
an empty road e_t is low; once the stalled vehicle is present it is high,
so the onset is the first persistent threshold crossing scanning forward
from the start of the video.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

from . import _kernels
from .detections import Box
from .errors import SimilarityError
from .frames import Frame, FrameManifest, read_frame


@dataclasses.dataclass(frozen=True)
class SsimConstants:
    """Standard SSIM stabilizers over a uniform square window, stride 1."""

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    window: int = 8

    def __post_init__(self) -> None:
        if self.window < 4:
            raise SimilarityError(f"window must be >= 4, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise SimilarityError("k1, k2, dynamic_range must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclasses.dataclass(frozen=True)
class SimilaritySeries:
    """Evidence samples (frame_index, timestamp_s, value) in frame order."""

    frame_indices: np.ndarray  # (n,) int64
    timestamps: np.ndarray  # (n,) float64
    values: np.ndarray  # (n,) float64, within [-1, 1]

    def __post_init__(self) -> None:
        fi = np.asarray(self.frame_indices, dtype=np.int64)
        ts = np.asarray(self.timestamps, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if not (len(fi) == len(ts) == len(vals)):
            raise SimilarityError("series arrays must have equal length")
        if len(fi) > 1 and not (np.diff(fi) > 0).all():
            raise SimilarityError("frame indices must be strictly increasing")
        if len(vals) and (vals.min() < -1.0 - 1e-9 or vals.max() > 1.0 + 1e-9):
            raise SimilarityError("series values must lie in [-1, 1]")
        vals = np.clip(vals, -1.0, 1.0)
        for name, arr in (("frame_indices", fi), ("timestamps", ts), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.frame_indices)


def ssim(a: np.ndarray, b: np.ndarray, consts: SsimConstants = SsimConstants()) -> float:
    """Mean SSIM between two equal-size uint8 patches."""
    if a.shape != b.shape:
        raise SimilarityError(f"patch shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape) < consts.window:
        raise SimilarityError(
            f"patch {a.shape[1]}x{a.shape[0]} is smaller than the {consts.window} px window"
        )
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    value = _kernels.ssim_mean(a, b, consts.window, consts.c1, consts.c2)
    # The formula is bounded by [-1, 1]; shave any last-ulp excess.
    return min(max(value, -1.0), 1.0)


def crop_roi(frame: Frame, roi: Box) -> np.ndarray:
    """Crop the ROI (outer integer bounds) from a frame's luminance."""
    x0 = math.floor(roi.x)
    y0 = math.floor(roi.y)
    x1 = math.ceil(roi.x + roi.w)
    y1 = math.ceil(roi.y + roi.h)
    if x0 < 0 or y0 < 0 or x1 > frame.width or y1 > frame.height:
        raise SimilarityError(
            f"roi ({roi.x},{roi.y},{roi.w},{roi.h}) exceeds frame "
            f"{frame.width}x{frame.height}"
        )
    return frame.luminance[y0:y1, x0:x1]


def roi_series(
    manifest: FrameManifest,
    roi: Box,
    reference_index: int,
    stride: int = 10,
    consts: SsimConstants = SsimConstants(),
) -> SimilaritySeries:
    """Evidence series e_t for frames at index 0, stride, 2*stride, ... up to
    and including the reference frame's index."""
    if stride < 1:
        raise SimilarityError(f"stride must be >= 1, got {stride}")
    reference = read_frame(manifest, reference_index)
    ref_crop = crop_roi(reference, roi)

    indices, times, values = [], [], []
    for entry in manifest.entries:
        if entry.frame_index > reference_index:
            break
        if entry.frame_index % stride != 0:
            continue
        frame = read_frame(manifest, entry.frame_index)
        if frame.luminance.shape != reference.luminance.shape:
            raise SimilarityError(
                f"frame {entry.frame_index} is {frame.width}x{frame.height}, "
                f"reference is {reference.width}x{reference.height}"
            )
        indices.append(entry.frame_index)
        times.append(entry.timestamp_s)
        values.append(ssim(crop_roi(frame, roi), ref_crop, consts))
    return SimilaritySeries(
        frame_indices=np.array(indices, dtype=np.int64),
        timestamps=np.array(times, dtype=np.float64),
        values=np.array(values, dtype=np.float64),
    )


def savgol(series: SimilaritySeries, window: int = 9, order: int = 2) -> SimilaritySeries:
    """Savitzky-Golay smoothing of the evidence values.

    Edge samples come from a polynomial fitted to the first/last window, so
    inputs that are polynomials of degree <= order are reproduced across the
    whole series. A series shorter than the window is returned unchanged
    with a warning.
    """
    if window < 3 or window % 2 == 0:
        raise SimilarityError(f"window must be odd and >= 3, got {window}")
    if not 0 <= order < window:
        raise SimilarityError(f"order must be in [0, window), got {order}")
    if len(series) < window:
        warnings.warn(
            f"series of {len(series)} samples is shorter than window {window}; not smoothed",
            stacklevel=2,
        )
        return series
    smoothed = savgol_filter(series.values, window, order, mode="interp")
    return SimilaritySeries(
        frame_indices=series.frame_indices,
        timestamps=series.timestamps,
        values=np.clip(smoothed, -1.0, 1.0),
    )


def backtrack_onset(
    series: SimilaritySeries, threshold: float = 0.5, persistence: int = 3
) -> float | None:
    """Timestamp of the first sample starting a run of `persistence`
    consecutive samples all above threshold; None when no such run exists."""
    if persistence < 1:
        raise SimilarityError(f"persistence must be >= 1, got {persistence}")
    above = series.values > threshold
    for i in range(len(series) - persistence + 1):
        if above[i : i + persistence].all():
            return float(series.timestamps[i])
    return None


def export_series(
    path: str | Path, raw: SimilaritySeries, smoothed: SimilaritySeries
) -> None:
    """Write the raw and smoothed evidence as CSV for plotting."""
    if len(raw) != len(smoothed) or not np.array_equal(
        raw.frame_indices, smoothed.frame_indices
    ):
        raise SimilarityError("raw and smoothed series must cover the same samples")
    lines = ["frame_index,timestamp_s,e_raw,e_smoothed"]
    for i in range(len(raw)):
        lines.append(
            f"{raw.frame_indices[i]},{raw.timestamps[i]:.6f},"
            f"{raw.values[i]:.9f},{smoothed.values[i]:.9f}"
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
