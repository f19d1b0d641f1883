"""Event-level evaluation: detection F1, normalized RMSE of onset timing,
their product S4, and the precision/delay curve summarized by its integral
(average precision delay).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MetricsError

RMSE_CAP_S = 300.0


@dataclasses.dataclass(frozen=True)
class GroundTruthEvent:
    video_id: str
    start_s: float
    end_s: float | None = None

    def __post_init__(self) -> None:
        if not self.video_id:
            raise MetricsError("video_id must be nonempty")
        if not math.isfinite(self.start_s) or self.start_s < 0:
            raise MetricsError(f"start_s must be finite and >= 0, got {self.start_s}")
        if self.end_s is not None:
            if not math.isfinite(self.end_s) or self.end_s <= self.start_s:
                raise MetricsError(
                    f"end_s must exceed start_s, got {self.end_s} vs {self.start_s}"
                )


@dataclasses.dataclass(frozen=True)
class PredictedEvent:
    video_id: str
    predicted_start_s: float
    score: float | None = None

    def __post_init__(self) -> None:
        if not self.video_id:
            raise MetricsError("video_id must be nonempty")
        if not math.isfinite(self.predicted_start_s) or self.predicted_start_s < 0:
            raise MetricsError(
                f"predicted_start_s must be finite and >= 0, got {self.predicted_start_s}"
            )
        if self.score is not None and not math.isfinite(self.score):
            raise MetricsError(f"score must be finite, got {self.score}")


@dataclasses.dataclass(frozen=True)
class MatchedPair:
    video_id: str
    gt_start_s: float
    predicted_start_s: float

    @property
    def delay_s(self) -> float:
        return self.predicted_start_s - self.gt_start_s


@dataclasses.dataclass(frozen=True)
class Matching:
    pairs: tuple[MatchedPair, ...]
    false_positives: tuple[PredictedEvent, ...]
    missed: tuple[GroundTruthEvent, ...]


def match_events(
    preds: Sequence[PredictedEvent],
    gts: Sequence[GroundTruthEvent],
    window_s: float = 10.0,
) -> Matching:
    """Greedy one-to-one matching per video, closest pairs first. A
    prediction is a true positive iff it lands within window_s of a still
    unmatched true event."""
    if window_s < 0:
        raise MetricsError(f"window_s must be >= 0, got {window_s}")
    videos = sorted(
        {p.video_id for p in preds} | {g.video_id for g in gts}
    )
    pairs: list[MatchedPair] = []
    false_positives: list[PredictedEvent] = []
    missed: list[GroundTruthEvent] = []
    for video in videos:
        vp = [p for p in preds if p.video_id == video]
        vg = [g for g in gts if g.video_id == video]
        candidates = sorted(
            (
                (abs(p.predicted_start_s - g.start_s), g.start_s, p.predicted_start_s, gi, pi)
                for pi, p in enumerate(vp)
                for gi, g in enumerate(vg)
                if abs(p.predicted_start_s - g.start_s) <= window_s
            ),
        )
        used_preds: set[int] = set()
        used_gts: set[int] = set()
        for _, _, _, gi, pi in candidates:
            if gi in used_gts or pi in used_preds:
                continue
            used_gts.add(gi)
            used_preds.add(pi)
            pairs.append(
                MatchedPair(video, vg[gi].start_s, vp[pi].predicted_start_s)
            )
        false_positives.extend(p for pi, p in enumerate(vp) if pi not in used_preds)
        missed.extend(g for gi, g in enumerate(vg) if gi not in used_gts)
    return Matching(tuple(pairs), tuple(false_positives), tuple(missed))


def f1(tp: int, fp: int, fn: int) -> float:
    if min(tp, fp, fn) < 0:
        raise MetricsError(f"counts must be >= 0, got tp={tp} fp={fp} fn={fn}")
    if tp == fp == fn == 0:
        warnings.warn("no events on either side; f1 defined as 0", stacklevel=2)
        return 0.0
    return 2.0 * tp / (2.0 * tp + fn + fp)


def nrmse(delays_s: Sequence[float]) -> float:
    """min(RMSE, 300 s) / 300 s over true-positive onset delays."""
    delays = np.asarray(delays_s, dtype=np.float64)
    if delays.size == 0:
        warnings.warn("no matched events; nrmse defined as 1.0", stacklevel=2)
        return 1.0
    rmse = math.sqrt(float(np.mean(delays * delays)))
    return min(rmse, RMSE_CAP_S) / RMSE_CAP_S


def s4(f1_value: float, nrmse_value: float) -> float:
    if not 0.0 <= f1_value <= 1.0 or not 0.0 <= nrmse_value <= 1.0:
        raise MetricsError(
            f"f1 and nrmse must be in [0, 1], got {f1_value}, {nrmse_value}"
        )
    return f1_value * (1.0 - nrmse_value)


@dataclasses.dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    f1: float
    rmse_s: float  # NaN when no events matched
    nrmse: float
    s4: float
    matches: tuple[MatchedPair, ...]
    false_positives: tuple[PredictedEvent, ...]
    missed: tuple[GroundTruthEvent, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.nrmse <= 1.0:
            raise MetricsError(f"nrmse must be in [0, 1], got {self.nrmse}")
        if abs(self.s4 - self.f1 * (1.0 - self.nrmse)) > 1e-9:
            raise MetricsError("s4 is inconsistent with f1 and nrmse")


def build_report(
    preds: Sequence[PredictedEvent],
    gts: Sequence[GroundTruthEvent],
    window_s: float = 10.0,
) -> EvalReport:
    matching = match_events(preds, gts, window_s)
    tp = len(matching.pairs)
    fp = len(matching.false_positives)
    fn = len(matching.missed)
    delays = [pair.delay_s for pair in matching.pairs]
    f1_value = f1(tp, fp, fn)
    rmse_s = (
        math.sqrt(sum(d * d for d in delays) / len(delays)) if delays else float("nan")
    )
    nrmse_value = nrmse(delays)
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        f1=f1_value,
        rmse_s=rmse_s,
        nrmse=nrmse_value,
        s4=s4(f1_value, nrmse_value),
        matches=matching.pairs,
        false_positives=matching.false_positives,
        missed=matching.missed,
    )


@dataclasses.dataclass(frozen=True)
class PrecisionDelayCurve:
    """Operating points (normalized delay alpha, precision), sorted by
    alpha, plus their integral over [0, 1]."""

    points: tuple[tuple[float, float], ...]
    apd: float
    delay_cap_s: float

    def __post_init__(self) -> None:
        if not self.points:
            raise MetricsError("curve must have at least one point")
        alphas = [a for a, _ in self.points]
        if any(not 0.0 <= a <= 1.0 for a in alphas):
            raise MetricsError("alpha values must be in [0, 1]")
        if any(not 0.0 <= p <= 1.0 for _, p in self.points):
            raise MetricsError("precision values must be in [0, 1]")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise MetricsError("points must be sorted by strictly increasing alpha")
        if not 0.0 <= self.apd <= 1.0:
            raise MetricsError(f"apd must be in [0, 1], got {self.apd}")
        if self.delay_cap_s <= 0:
            raise MetricsError(f"delay_cap_s must be > 0, got {self.delay_cap_s}")


def _integrate_points(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal integral over [0, 1], extending the first and last
    precisions as constants to the interval ends."""
    xs = [a for a, _ in points]
    ys = [p for _, p in points]
    if xs[0] > 0.0:
        xs.insert(0, 0.0)
        ys.insert(0, ys[0])
    if xs[-1] < 1.0:
        xs.append(1.0)
        ys.append(ys[-1])
    return float(np.trapezoid(ys, xs))


def apd(curve: PrecisionDelayCurve) -> float:
    return _integrate_points(curve.points)


def precision_delay_curve(
    runs: Sequence[tuple[float, Sequence[PredictedEvent]]],
    gts: Sequence[GroundTruthEvent],
    delay_cap_s: float = 300.0,
    window_s: float | None = None,
) -> PrecisionDelayCurve:
    """One operating point per detector run (threshold label, predictions).

    precision = TP / (TP + FP); alpha = min(mean |TP delay|, cap) / cap.
    Matching uses window_s, defaulting to the delay cap so that late-but-real
    alarms register as delayed detections rather than false positives. Runs
    with no alarms are skipped with a warning; runs with alarms but no true
    positives sit at alpha = 1 (no detection is as late as it gets). Equal
    alphas collapse to their best precision.
    """
    if delay_cap_s <= 0:
        raise MetricsError(f"delay_cap_s must be > 0, got {delay_cap_s}")
    if window_s is None:
        window_s = delay_cap_s
    raw_points: list[tuple[float, float]] = []
    for threshold, preds in runs:
        if len(preds) == 0:
            warnings.warn(
                f"run at threshold {threshold} produced no alarms; skipped",
                stacklevel=2,
            )
            continue
        matching = match_events(preds, gts, window_s)
        tp = len(matching.pairs)
        precision = tp / (tp + len(matching.false_positives))
        if tp == 0:
            alpha = 1.0
        else:
            mean_delay = sum(abs(p.delay_s) for p in matching.pairs) / tp
            alpha = min(mean_delay, delay_cap_s) / delay_cap_s
        raw_points.append((alpha, precision))
    if not raw_points:
        raise MetricsError("every run was skipped; no operating points")
    best: dict[float, float] = {}
    for alpha, precision in raw_points:
        best[alpha] = max(precision, best.get(alpha, 0.0))
    points = tuple(sorted(best.items()))
    return PrecisionDelayCurve(
        points=points, apd=_integrate_points(points), delay_cap_s=delay_cap_s
    )


def load_ground_truth(path: str | Path) -> list[GroundTruthEvent]:
    """Parse `<video_id> <start_s> [end_s]` lines."""
    events = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise MetricsError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(fields)}")
        try:
            start = float(fields[1])
            end = float(fields[2]) if len(fields) == 3 else None
            events.append(GroundTruthEvent(fields[0], start, end))
        except (ValueError, MetricsError) as exc:
            raise MetricsError(f"{path}:{lineno}: {exc}") from exc
    return events


def load_predictions(path: str | Path) -> list[PredictedEvent]:
    """Parse `<video_id> <predicted_start_s> [score]` lines."""
    events = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise MetricsError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(fields)}")
        try:
            start = float(fields[1])
            score = float(fields[2]) if len(fields) == 3 else None
            events.append(PredictedEvent(fields[0], start, score))
        except (ValueError, MetricsError) as exc:
            raise MetricsError(f"{path}:{lineno}: {exc}") from exc
    return events


def write_ground_truth(path: str | Path, events: Sequence[GroundTruthEvent]) -> None:
    lines = []
    for ev in events:
        if ev.end_s is None:
            lines.append(f"{ev.video_id} {ev.start_s:.3f}")
        else:
            lines.append(f"{ev.video_id} {ev.start_s:.3f} {ev.end_s:.3f}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_predictions(path: str | Path, events: Sequence[PredictedEvent]) -> None:
    lines = []
    for ev in events:
        if ev.score is None:
            lines.append(f"{ev.video_id} {ev.predicted_start_s:.6f}")
        else:
            lines.append(f"{ev.video_id} {ev.predicted_start_s:.6f} {ev.score:.4f}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def format_report(report: EvalReport) -> str:
    """Human-readable summary followed by a machine-readable CSV block."""
    rmse_text = "n/a" if math.isnan(report.rmse_s) else f"{report.rmse_s:.4f}"
    lines = [
        f"events: tp={report.tp} fp={report.fp} fn={report.fn}",
        f"f1={report.f1:.4f} rmse_s={rmse_text} nrmse={report.nrmse:.4f} s4={report.s4:.4f}",
    ]
    if report.matches:
        lines.append("")
        lines.append("matched events (delay = predicted - true, seconds):")
        lines.append(f"  {'video_id':<24}{'true_s':>12}{'pred_s':>12}{'delay_s':>12}")
        for pair in report.matches:
            lines.append(
                f"  {pair.video_id:<24}{pair.gt_start_s:>12.3f}"
                f"{pair.predicted_start_s:>12.3f}{pair.delay_s:>12.3f}"
            )
    if report.false_positives:
        lines.append("")
        lines.append("false positives:")
        for ev in report.false_positives:
            lines.append(f"  {ev.video_id:<24}{ev.predicted_start_s:>12.3f}")
    if report.missed:
        lines.append("")
        lines.append("missed events:")
        for ev in report.missed:
            lines.append(f"  {ev.video_id:<24}{ev.start_s:>12.3f}")
    lines.append("")
    lines.append("csv:")
    lines.append("metric,value")
    lines.append(f"tp,{report.tp}")
    lines.append(f"fp,{report.fp}")
    lines.append(f"fn,{report.fn}")
    lines.append(f"f1,{report.f1:.6f}")
    lines.append(f"rmse_s,{'nan' if math.isnan(report.rmse_s) else f'{report.rmse_s:.6f}'}")
    lines.append(f"nrmse,{report.nrmse:.6f}")
    lines.append(f"s4,{report.s4:.6f}")
    return "\n".join(lines) + "\n"


def export_curve(path: str | Path, curve: PrecisionDelayCurve) -> None:
    lines = ["alpha,precision"]
    for alpha, precision in curve.points:
        lines.append(f"{alpha:.6f},{precision:.6f}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
