"""End-to-end orchestration: frames -> backgrounds -> detections cleanup ->
candidates -> similarity evidence -> onset estimate -> predicted events.

Stages follow the module boundaries exactly; this file only wires them
together and keeps ordering deterministic regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import background, candidates, detections, sequential, similarity
from .background import BackgroundSnapshot
from .config import PipelineConfig
from .errors import ConfigError, DetectionError, PipelineError
from .frames import FrameManifest, filter_corrupted, load_manifest, read_frame
from .metrics import PredictedEvent
from .sequential import AnomalyAlarm, Calibration, CusumConfig
from .similarity import SimilaritySeries, SsimConstants


@dataclasses.dataclass(frozen=True)
class CandidateResult:
    candidate: candidates.CandidateRegion
    reference_index: int
    raw: SimilaritySeries
    smoothed: SimilaritySeries
    onset_s: float | None
    score: float | None
    alarm: AnomalyAlarm | None = None


@dataclasses.dataclass(frozen=True)
class RunResult:
    video_id: str
    events: tuple[PredictedEvent, ...]
    candidate_results: tuple[CandidateResult, ...]
    snapshots: tuple[BackgroundSnapshot, ...]
    survivors: FrameManifest


def effective_workers(config: PipelineConfig) -> int:
    """Config worker count, capped by the STALL_SENTINEL_WORKERS env var."""
    workers = config.workers
    cap = os.environ.get("STALL_SENTINEL_WORKERS")
    if cap is not None:
        try:
            cap_value = int(cap)
        except ValueError as exc:
            raise ConfigError(
                f"STALL_SENTINEL_WORKERS must be an integer, got {cap!r}"
            ) from exc
        if cap_value < 1:
            raise ConfigError(f"STALL_SENTINEL_WORKERS must be >= 1, got {cap_value}")
        workers = min(workers, cap_value)
    return workers


def compute_snapshots(
    survivors: FrameManifest, config: PipelineConfig, workers: int = 1
) -> tuple[BackgroundSnapshot, ...]:
    """Forward and backward background passes, merged. The two passes are
    independent, so running them on two threads cannot change the result."""
    params = config.mixture_params()

    def run(direction: str) -> list[BackgroundSnapshot]:
        return background.run_direction(
            survivors, direction, config.snapshot_interval, params
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fwd_future = pool.submit(run, "forward")
            bwd_future = pool.submit(run, "backward")
            fwd, bwd = fwd_future.result(), bwd_future.result()
    else:
        fwd, bwd = run("forward"), run("backward")
    return tuple(background.merge(fwd, bwd))


def _candidate_evidence(
    survivors: FrameManifest,
    snapshots: tuple[BackgroundSnapshot, ...],
    candidate: candidates.CandidateRegion,
    config: PipelineConfig,
) -> tuple[int, SimilaritySeries, SimilaritySeries]:
    reference_index = snapshots[candidate.first_seen_snapshot].source_frame_index
    raw = similarity.roi_series(
        survivors,
        candidate.roi,
        reference_index,
        stride=config.stride,
        consts=SsimConstants(window=config.ssim_window),
    )
    smoothed = similarity.savgol(raw, config.savgol_window, config.savgol_order)
    return reference_index, raw, smoothed


def _threshold_result(
    reference_index: int,
    raw: SimilaritySeries,
    smoothed: SimilaritySeries,
    candidate: candidates.CandidateRegion,
    config: PipelineConfig,
) -> CandidateResult:
    onset = similarity.backtrack_onset(
        smoothed, config.onset_threshold, config.onset_persistence
    )
    score = float(smoothed.values.max()) if len(smoothed) else None
    return CandidateResult(candidate, reference_index, raw, smoothed, onset, score)


def _sequential_result(
    reference_index: int,
    raw: SimilaritySeries,
    smoothed: SimilaritySeries,
    candidate: candidates.CandidateRegion,
    config: PipelineConfig,
    calibration: Calibration | None,
) -> CandidateResult:
    if calibration is None:
        train = max(1, int(len(raw) * config.calibration_fraction))
        calibration = sequential.calibrate_baseline(
            raw.values[:train], config.significance
        )
    normalized = SimilaritySeries(
        frame_indices=raw.frame_indices,
        timestamps=raw.timestamps,
        values=sequential.normalize_evidence(raw.values, calibration),
    )
    detector = CusumConfig(
        baseline=calibration.baseline,
        alarm_threshold=config.alarm_threshold,
        localize_threshold=config.localize_threshold,
        significance=config.significance,
    )
    alarm = sequential.analyze(normalized, detector)
    if alarm is None:
        onset = None
    elif alarm.localized_frames:
        first = min(alarm.localized_frames)
        position = int(np.nonzero(normalized.frame_indices == first)[0][0])
        onset = float(normalized.timestamps[position])
    else:
        onset = alarm.detection_time
    score = float(normalized.values.max()) if len(normalized) else None
    return CandidateResult(
        candidate, reference_index, raw, smoothed, onset, score, alarm
    )


def run_video(
    video_dir: str | Path,
    config: PipelineConfig,
    video_id: str | None = None,
    use_sequential: bool = False,
    precomputed_snapshots: tuple[BackgroundSnapshot, ...] | None = None,
) -> RunResult:
    """Run the full pipeline on one video directory (manifest.txt,
    detections.csv, mask.pgm).

    precomputed_snapshots short-circuits the background stage with
    snapshots already computed by compute_snapshots on the same survivor
    manifest; callers evaluating several detection variants of one scene
    use it to avoid repeating the heaviest stage.
    """
    video_dir = Path(video_dir)
    if video_id is None:
        video_id = video_dir.name
    for name in ("manifest.txt", "detections.csv", "mask.pgm"):
        if not (video_dir / name).exists():
            raise PipelineError(f"missing input {video_dir / name}")

    manifest = load_manifest(video_dir / "manifest.txt")
    survivors = filter_corrupted(
        manifest, config.mean_threshold, config.sample_period_s
    )
    if not survivors.entries:
        warnings.warn(f"{video_id}: every frame window is corrupted", stacklevel=2)
        return RunResult(video_id, (), (), (), survivors)
    workers = effective_workers(config)

    if precomputed_snapshots is None:
        snapshots = compute_snapshots(survivors, config, workers)
    else:
        snapshots = precomputed_snapshots

    records = detections.load_detections(video_dir / "detections.csv")
    for record in records:
        if record.snapshot_index >= len(snapshots):
            raise DetectionError(
                f"detection references snapshot {record.snapshot_index} but only "
                f"{len(snapshots)} snapshots exist"
            )
    records = detections.nms(records, config.nms_iou)
    cloud = detections.build_cloud(records)
    records = detections.filter_misclassified(
        records, config.misclass_k, config.misclass_dist_px, cloud=cloud
    )
    records = detections.filter_slow(
        records, config.slow_k, config.slow_dist_px, cloud=cloud
    )

    first_frame = read_frame(survivors, survivors.entries[0].frame_index)
    mask = candidates.load_mask(
        video_dir / "mask.pgm", expected_size=(first_frame.width, first_frame.height)
    )
    regions = candidates.build_candidates(
        records,
        mask,
        k_max=config.elbow_k_max,
        seed=config.seed,
        roi_margin=config.roi_margin,
        min_scale_px=config.elbow_min_scale_px,
    )

    calibration: Calibration | None = None
    if use_sequential:
        if config.calibration_path:
            calibration = sequential.read_calibration(config.calibration_path)
        elif regions:
            warnings.warn(
                "no calibration artifact configured; calibrating each candidate "
                f"on the leading {config.calibration_fraction:.0%} of its own evidence",
                stacklevel=2,
            )

    def process(candidate: candidates.CandidateRegion) -> CandidateResult:
        reference_index, raw, smoothed = _candidate_evidence(
            survivors, snapshots, candidate, config
        )
        if use_sequential:
            return _sequential_result(
                reference_index, raw, smoothed, candidate, config, calibration
            )
        return _threshold_result(reference_index, raw, smoothed, candidate, config)

    if workers > 1 and len(regions) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = tuple(pool.map(process, regions))
    else:
        results = tuple(process(candidate) for candidate in regions)

    events = tuple(
        sorted(
            (
                PredictedEvent(video_id, result.onset_s, result.score)
                for result in results
                if result.onset_s is not None
            ),
            key=lambda ev: ev.predicted_start_s,
        )
    )
    return RunResult(video_id, events, results, snapshots, survivors)


def training_scores(
    video_dir: str | Path, config: PipelineConfig
) -> np.ndarray:
    """Raw evidence values from a training video, for baseline calibration.

    Pools every candidate's series when the video has candidate regions;
    an anomaly-free video typically has none, so the fallback measures
    evidence over the road mask's bounding box against the last background
    snapshot's source frame.
    """
    video_dir = Path(video_dir)
    result = run_video(video_dir, config)
    pooled = [res.raw.values for res in result.candidate_results]
    if pooled:
        return np.concatenate(pooled)
    if not result.snapshots:
        raise PipelineError(
            f"{video_dir}: video is shorter than one snapshot interval; "
            "nothing to calibrate on"
        )
    mask = candidates.load_mask(video_dir / "mask.pgm")
    ys, xs = np.nonzero(mask.road)
    if ys.size == 0:
        raise PipelineError(f"{video_dir}: road mask is empty; nothing to calibrate on")
    roi = detections.Box(
        x=float(xs.min()),
        y=float(ys.min()),
        w=float(xs.max() - xs.min() + 1),
        h=float(ys.max() - ys.min() + 1),
    )
    reference_index = result.snapshots[-1].source_frame_index
    raw = similarity.roi_series(
        result.survivors,
        roi,
        reference_index,
        stride=config.stride,
        consts=SsimConstants(window=config.ssim_window),
    )
    return raw.values.copy()
