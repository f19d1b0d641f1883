"""Command-line entry points: generate, run, calibrate, eval."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .background import write_snapshots
from .config import PipelineConfig, load_config
from .errors import MetricsError, StallSentinelError
from .metrics import (
    build_report,
    export_curve,
    format_report,
    load_ground_truth,
    load_predictions,
    precision_delay_curve,
    write_predictions,
)
from .pipeline import run_video, training_scores
from .sequential import calibrate_baseline, write_calibration
from .similarity import export_series
from .synth import generate, load_scene_spec

APD_NOTE = (
    "note: APD integrates precision over normalized delay in [0, 1]; the "
    "first and last measured precisions extend as constants to the ends."
)


def _load_config(path: str | None) -> PipelineConfig:
    return load_config(path) if path else PipelineConfig()


def _cmd_generate(args: argparse.Namespace) -> int:
    spec = load_scene_spec(args.spec)
    scene = generate(spec, args.out_dir)
    print(
        f"{scene.video_id}: {spec.frame_count} frames, "
        f"{len(scene.detections)} detections, {len(spec.stalls)} stalls "
        f"-> {scene.out_dir}"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    result = run_video(
        args.video_dir,
        config,
        video_id=args.video_id,
        use_sequential=args.sequential,
    )
    out = Path(args.out) if args.out else Path(args.video_dir) / "predictions.txt"
    write_predictions(out, result.events)
    if args.dump_backgrounds:
        write_snapshots(list(result.snapshots), args.dump_backgrounds)
    if args.export_series:
        series_dir = Path(args.export_series)
        series_dir.mkdir(parents=True, exist_ok=True)
        for i, res in enumerate(result.candidate_results):
            export_series(series_dir / f"series_candidate_{i}.csv", res.raw, res.smoothed)
    print(
        f"{result.video_id}: {len(result.snapshots)} snapshots, "
        f"{len(result.candidate_results)} candidates, "
        f"{len(result.events)} predicted events -> {out}"
    )
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    scores = training_scores(args.video_dir, config)
    calibration = calibrate_baseline(scores, config.significance)
    write_calibration(args.out, calibration)
    print(
        f"calibrated on {scores.size} evidence samples: "
        f"baseline={calibration.baseline:.6f} "
        f"norm=[{calibration.norm_min:.6f}, {calibration.norm_max:.6f}] "
        f"-> {args.out}"
    )
    return 0


def _parse_sweep(value: str) -> list[float]:
    prefix, sep, rest = value.partition("=")
    if prefix.strip() != "h" or not sep:
        raise MetricsError(f"--sweep expects h=<comma-separated floats>, got {value!r}")
    try:
        thresholds = [float(tok) for tok in rest.split(",") if tok.strip()]
    except ValueError as exc:
        raise MetricsError(f"--sweep has a non-numeric threshold in {value!r}") from exc
    if not thresholds:
        raise MetricsError("--sweep needs at least one threshold")
    return thresholds


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    preds = load_predictions(args.predictions)
    gts = load_ground_truth(args.ground_truth)
    report = build_report(preds, gts, config.match_window_s)
    text = format_report(report)
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.sweep:
        thresholds = _parse_sweep(args.sweep)
        if any(p.score is None for p in preds):
            raise MetricsError("--sweep requires a score on every prediction")
        runs = [
            (h, [p for p in preds if p.score >= h]) for h in sorted(thresholds)
        ]
        curve = precision_delay_curve(runs, gts, delay_cap_s=config.delay_cap_s)
        export_curve(args.curve_out, curve)
        print(f"apd={curve.apd:.6f} over {len(curve.points)} points -> {args.curve_out}")
        print(APD_NOTE)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stall-sentinel",
        description="Stalled-vehicle detection over fixed-camera frame sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="render a synthetic scene to disk")
    p_gen.add_argument("spec", help="scene spec file")
    p_gen.add_argument("out_dir", help="output directory")
    p_gen.set_defaults(func=_cmd_generate)

    p_run = sub.add_parser("run", help="run the detection pipeline on a video dir")
    p_run.add_argument("video_dir", help="directory with manifest.txt, detections.csv, mask.pgm")
    p_run.add_argument("--config", help="pipeline config file")
    p_run.add_argument("--out", help="predictions output path (default <video_dir>/predictions.txt)")
    p_run.add_argument("--video-id", help="event video id (default: video_dir name)")
    p_run.add_argument(
        "--sequential",
        action="store_true",
        help="use the sequential accumulation detector instead of threshold backtracking",
    )
    p_run.add_argument("--export-series", help="directory for per-candidate evidence CSVs")
    p_run.add_argument("--dump-backgrounds", help="directory for merged background snapshots")
    p_run.set_defaults(func=_cmd_run)

    p_cal = sub.add_parser("calibrate", help="calibrate the detector baseline on a training video")
    p_cal.add_argument("video_dir", help="training video directory")
    p_cal.add_argument("--config", help="pipeline config file")
    p_cal.add_argument("--out", required=True, help="calibration artifact path")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("predictions", help="predictions file")
    p_eval.add_argument("ground_truth", help="ground truth file")
    p_eval.add_argument("--config", help="pipeline config file")
    p_eval.add_argument("--out", help="write the report here as well as stdout")
    p_eval.add_argument("--sweep", help="h=<list>: score thresholds for the precision-delay curve")
    p_eval.add_argument(
        "--curve-out",
        default="apd_curve.csv",
        help="precision-delay curve CSV path (with --sweep)",
    )
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StallSentinelError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
