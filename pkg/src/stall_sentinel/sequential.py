"""Nonparametric CUSUM detector over the evidence stream.

Evidence is min-max normalized with constants frozen at calibration time,
zeros are dropped, and the baseline is the (1 - significance) nearest-rank
percentile of what remains. At test time the statistic

    s_t = max(0, s_{t-1} + e_t - baseline)

accumulates; the alarm fires at the first sample with s_t >= alarm
threshold, and localization walks forward to where the statistic starts a
sustained decline, flagging the window samples whose raw evidence exceeds
the localization threshold.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import SequentialError
from .similarity import SimilaritySeries

# A decline must persist this many consecutive samples before it counts as
# the end of the anomalous window; single-sample dips are noise.
DECREASE_RUN = 2


@dataclasses.dataclass(frozen=True)
class CusumConfig:
    """Detector knobs. localize_threshold=None means reuse the baseline."""

    baseline: float
    alarm_threshold: float = 1.0
    localize_threshold: float | None = None
    significance: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.baseline <= 1.0:
            raise SequentialError(f"baseline must be in [0, 1], got {self.baseline}")
        if self.alarm_threshold <= 0:
            raise SequentialError(
                f"alarm_threshold must be > 0, got {self.alarm_threshold}"
            )
        if self.localize_threshold is None:
            object.__setattr__(self, "localize_threshold", self.baseline)
        if not 0.0 <= self.localize_threshold <= 1.0:
            raise SequentialError(
                f"localize_threshold must be in [0, 1], got {self.localize_threshold}"
            )
        if not 0.0 < self.significance < 1.0:
            raise SequentialError(
                f"significance must be in (0, 1), got {self.significance}"
            )


@dataclasses.dataclass(frozen=True)
class CusumState:
    """Accumulated statistic and sample ordinal; a plain value, safe to save
    and resume from."""

    s: float = 0.0
    t: int = 0

    def __post_init__(self) -> None:
        if self.s < 0:
            raise SequentialError(f"statistic must be >= 0, got {self.s}")
        if self.t < 0:
            raise SequentialError(f"sample ordinal must be >= 0, got {self.t}")


@dataclasses.dataclass(frozen=True)
class AnomalyAlarm:
    detection_time: float
    decrease_offset: int
    localized_frames: tuple[int, ...]


@dataclasses.dataclass(frozen=True)
class Calibration:
    """Baseline plus the normalization constants it was computed under."""

    baseline: float
    norm_min: float
    norm_max: float
    significance: float


def calibrate_baseline(
    training_scores: np.ndarray, significance: float = 0.05
) -> Calibration:
    """Min-max normalize the training scores, drop exact zeros, and take the
    (1 - significance) nearest-rank percentile as the baseline."""
    if not 0.0 < significance < 1.0:
        raise SequentialError(f"significance must be in (0, 1), got {significance}")
    scores = np.asarray(training_scores, dtype=np.float64)
    if scores.size == 0:
        raise SequentialError("training scores are empty")
    if not np.isfinite(scores).all():
        raise SequentialError("training scores must be finite")
    if (scores == 0.0).all():
        raise SequentialError("training scores are all zero")
    lo = float(scores.min())
    hi = float(scores.max())
    if lo == hi:
        warnings.warn(
            "training scores are constant; baseline degenerates to 1.0",
            stacklevel=2,
        )
        return Calibration(baseline=1.0, norm_min=lo, norm_max=hi, significance=significance)
    normalized = (scores - lo) / (hi - lo)
    nonzero = np.sort(normalized[normalized != 0.0])
    # Nearest-rank: the ceil(q*n)-th smallest. The small backoff keeps an
    # exact-product rank like 0.8*5 from rounding up to the next rank.
    rank = math.ceil((1.0 - significance) * nonzero.size - 1e-9)
    rank = min(max(rank, 1), nonzero.size)
    return Calibration(
        baseline=float(nonzero[rank - 1]), norm_min=lo, norm_max=hi, significance=significance
    )


def normalize_evidence(values: np.ndarray, calibration: Calibration) -> np.ndarray:
    """Map raw evidence through the calibration's min-max constants, clipped
    to [0, 1]. A degenerate calibration (min == max) maps everything to 0."""
    values = np.asarray(values, dtype=np.float64)
    span = calibration.norm_max - calibration.norm_min
    if span <= 0:
        return np.zeros_like(values)
    return np.clip((values - calibration.norm_min) / span, 0.0, 1.0)


def cusum_step(state: CusumState, evidence: float, baseline: float) -> CusumState:
    if not 0.0 <= evidence <= 1.0:
        raise SequentialError(f"evidence must be in [0, 1], got {evidence}")
    return CusumState(s=max(0.0, state.s + evidence - baseline), t=state.t + 1)


def cusum_trace(values: np.ndarray, baseline: float) -> np.ndarray:
    """Statistic s_t after each sample, starting from s=0."""
    values = np.asarray(values, dtype=np.float64)
    state = CusumState()
    out = np.empty(values.size, dtype=np.float64)
    for i, e in enumerate(values):
        state = cusum_step(state, float(e), baseline)
        out[i] = state.s
    return out


def detect(series: SimilaritySeries, config: CusumConfig) -> float | None:
    """Timestamp of the first sample whose statistic reaches the alarm
    threshold; None when the stream never alarms."""
    trace = cusum_trace(series.values, config.baseline)
    hits = np.nonzero(trace >= config.alarm_threshold)[0]
    if hits.size == 0:
        return None
    return float(series.timestamps[hits[0]])


def decrease_offset(trace: np.ndarray, alarm_position: int) -> int:
    """Offset M of the last sample before the statistic begins a sustained
    (DECREASE_RUN-sample) strict decline after the alarm; if no such decline
    exists the window runs to the end of the trace."""
    trace = np.asarray(trace, dtype=np.float64)
    last = trace.size - 1
    if not 0 <= alarm_position <= last:
        raise SequentialError(f"alarm position {alarm_position} outside trace")
    for m in range(1, last - alarm_position + 1):
        start = alarm_position + m
        if start + DECREASE_RUN - 1 > last:
            break
        run = trace[start - 1 : start + DECREASE_RUN]
        if (np.diff(run) < 0).all():
            return m - 1
    return last - alarm_position


def localize(
    series: SimilaritySeries,
    statistic_trace: np.ndarray,
    detection_time: float,
    localize_threshold: float,
) -> list[int]:
    """Frame indices inside [T, T+M] whose raw evidence exceeds the
    localization threshold."""
    trace = np.asarray(statistic_trace, dtype=np.float64)
    if trace.size != len(series):
        raise SequentialError("statistic trace does not match series length")
    positions = np.nonzero(series.timestamps == detection_time)[0]
    if positions.size == 0:
        raise SequentialError(f"detection time {detection_time} not in series")
    pos = int(positions[0])
    m_off = decrease_offset(trace, pos)
    window = slice(pos, pos + m_off + 1)
    flagged = np.nonzero(series.values[window] > localize_threshold)[0]
    return [int(series.frame_indices[pos + i]) for i in flagged]


def analyze(series: SimilaritySeries, config: CusumConfig) -> AnomalyAlarm | None:
    """detect + localize in one pass; None when the stream never alarms."""
    trace = cusum_trace(series.values, config.baseline)
    hits = np.nonzero(trace >= config.alarm_threshold)[0]
    if hits.size == 0:
        return None
    pos = int(hits[0])
    detection_time = float(series.timestamps[pos])
    frames = localize(series, trace, detection_time, config.localize_threshold)
    return AnomalyAlarm(
        detection_time=detection_time,
        decrease_offset=decrease_offset(trace, pos),
        localized_frames=tuple(frames),
    )


_ARTIFACT_KEYS = ("gamma", "norm_min", "norm_max", "alpha")


def write_calibration(path: str | Path, calibration: Calibration) -> None:
    text = (
        f"gamma={calibration.baseline!r}\n"
        f"norm_min={calibration.norm_min!r}\n"
        f"norm_max={calibration.norm_max!r}\n"
        f"alpha={calibration.significance!r}\n"
    )
    Path(path).write_text(text, encoding="utf-8")


def read_calibration(path: str | Path) -> Calibration:
    values: dict[str, float] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or key not in _ARTIFACT_KEYS:
            raise SequentialError(f"{path}:{lineno}: unrecognized calibration line {line!r}")
        if key in values:
            raise SequentialError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(raw.strip())
        except ValueError as exc:
            raise SequentialError(f"{path}:{lineno}: bad float for {key!r}") from exc
    missing = [k for k in _ARTIFACT_KEYS if k not in values]
    if missing:
        raise SequentialError(f"{path}: missing calibration keys {missing}")
    return Calibration(
        baseline=values["gamma"],
        norm_min=values["norm_min"],
        norm_max=values["norm_max"],
        significance=values["alpha"],
    )
