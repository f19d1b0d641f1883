"""Acceptance suite: ten end-level criteria, one test each.

Every test prints its own PASS/FAIL line (straight to the terminal, past
pytest's capture) and enforces a wall-clock budget, so a green run doubles
as a performance smoke test on a small machine.
"""

import dataclasses
import functools
import shutil
import time

import numpy as np
import pytest

from oracles import knn_brute, nms_oracle, ssim_direct, trapezoid_by_hand
from conftest import write_video

from stall_sentinel.background import MixtureModel, render_background, run_direction, update
from stall_sentinel.candidates import kmeans
from stall_sentinel.cli import main
from stall_sentinel.config import PipelineConfig
from stall_sentinel.detections import (
    Box,
    DetectionRecord,
    build_cloud,
    filter_misclassified,
    filter_slow,
    nms,
    write_detections,
)
from stall_sentinel.metrics import (
    PrecisionDelayCurve,
    apd,
    build_report,
    f1,
    load_ground_truth,
    load_predictions,
    nrmse,
    s4,
)
from stall_sentinel.pipeline import run_video
from stall_sentinel.sequential import CusumConfig, CusumState, cusum_step, cusum_trace, detect
from stall_sentinel.similarity import SimilaritySeries, SsimConstants, savgol, ssim
from stall_sentinel.synth import (
    DetectorNoise,
    SceneSpec,
    StallEvent,
    VehicleTrack,
    generate,
    simulate_detections,
)


def criterion(label, budget_s):
    """Wrap a test so it reports one PASS/FAIL line and asserts its runtime."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(**kwargs):
            capsys = kwargs["capsys"]
            start = time.perf_counter()
            try:
                fn(**kwargs)
                elapsed = time.perf_counter() - start
                assert elapsed < budget_s, (
                    f"{label}: runtime {elapsed:.2f}s exceeds the {budget_s:g}s budget"
                )
            except BaseException:
                with capsys.disabled():
                    print(f"\n{label}: FAIL")
                raise
            with capsys.disabled():
                print(f"\n{label}: PASS ({elapsed:.2f}s)")

        return wrapper

    return deco


@criterion("AC-1 score arithmetic", 0.001)
def test_ac1_published_score_arithmetic(capsys):
    # F1 = 0.9157 with 8.4027 s onset RMSE lands on the published 0.8900.
    score = s4(0.9157, nrmse([8.4027]))
    assert abs(score - 0.8900) < 5e-4


@criterion("AC-2 metric bounds and monotonicity (10k cases)", 5.0)
def test_ac2_randomized_metric_properties(capsys):
    rng = np.random.default_rng(42)
    for _ in range(10_000):
        tp, fp, fn = (int(v) for v in rng.integers(0, 40, 3))
        if tp + fp + fn == 0:
            tp = 1
        delays = rng.uniform(-450.0, 450.0, int(rng.integers(1, 12))).tolist()
        f1_value = f1(tp, fp, fn)
        nrmse_value = nrmse(delays)
        s4_value = s4(f1_value, nrmse_value)
        assert 0.0 <= f1_value <= 1.0
        assert 0.0 <= nrmse_value <= 1.0
        assert 0.0 <= s4_value <= 1.0
        # Raising F1 never lowers S4; raising NRMSE never raises it.
        f1_hi = min(1.0, f1_value + float(rng.uniform(0.0, 0.5)))
        nr_hi = min(1.0, nrmse_value + float(rng.uniform(0.0, 0.5)))
        assert s4(f1_hi, nrmse_value) >= s4_value
        assert s4(f1_value, nr_hi) <= s4_value


def ac3_scene_spec(i):
    """Scene i of the end-to-end suite: 1-3 stalls at least 150 px apart.

    Onsets stay in [120, 420] so every stall is parked for a full interval
    at least 60 s before its candidate's reference frame; closer to the
    boundary the evidence run gets too short for the persistence rule.
    """
    n_stalls = 1 + i % 3
    onsets = (150 + 10 * (i % 4), 240 + 10 * (i % 7), 330 + 10 * (i % 9))
    xs = (80, 350, 620)
    sizes = ((40, 24), (50, 30), (60, 36))
    y = 140 + 40 * (i % 4)
    stalls = tuple(
        StallEvent(
            x=xs[j],
            y=y + 6 * j,
            w=sizes[(i + j) % 3][0],
            h=sizes[(i + j) % 3][1],
            onset_s=float(onsets[j]),
            luminance=150 + 20 * j,
        )
        for j in range(n_stalls)
    )
    # One through-traffic vehicle in the top lane, clear of every stall ROI.
    track = VehicleTrack(
        x0=0, y0=104, w=26, h=14, vx=1.0, vy=0.0, enter_s=0.0, exit_s=774.0
    )
    return SceneSpec(
        width=800,
        height=410,
        duration_s=900.0,
        snapshot_interval=120,
        road_rects=((0, 100, 800, 220),),
        stalls=stalls,
        tracks=(track,),
        seed=i,
    )


@criterion("AC-3 end-to-end synthetic suite (20 scenes)", 300.0)
def test_ac3_end_to_end_suite(capsys, tmp_path):
    config = PipelineConfig(
        snapshot_interval=120,
        max_components=3,
        onset_threshold=0.7,
        match_window_s=120.0,
    )
    noise = DetectorNoise(miss_rate=0.1, jitter_px=3.0, false_positive_rate=0.05)
    onset_window_s = max(2 * config.stride, config.snapshot_interval)
    clean_events, noisy_events, gts = [], [], []
    for i in range(20):
        spec = ac3_scene_spec(i)
        scene = generate(spec, tmp_path / f"scene_{i:02d}")
        clean = run_video(scene.out_dir, config)
        clean_events.extend(clean.events)
        gts.extend(load_ground_truth(scene.ground_truth_path))

        # Same frames and backgrounds, noisy detector transcript.
        noisy_dir = tmp_path / f"noisy_{i:02d}"
        noisy_dir.mkdir()
        for name in ("manifest.txt", "mask.pgm"):
            (noisy_dir / name).write_bytes((scene.out_dir / name).read_bytes())
        (noisy_dir / "frames").symlink_to(scene.out_dir / "frames")
        records = simulate_detections(
            dataclasses.replace(spec, detector_sim=noise), scene.survivors
        )
        write_detections(noisy_dir / "detections.csv", records)
        noisy = run_video(
            noisy_dir,
            config,
            video_id=scene.video_id,
            precomputed_snapshots=clean.snapshots,
        )
        noisy_events.extend(noisy.events)
        shutil.rmtree(noisy_dir)
        shutil.rmtree(scene.out_dir)

    clean_report = build_report(clean_events, gts, config.match_window_s)
    assert clean_report.f1 == 1.0, (clean_report.fp, clean_report.fn)
    assert all(abs(p.delay_s) <= onset_window_s for p in clean_report.matches)
    noisy_report = build_report(noisy_events, gts, config.match_window_s)
    assert noisy_report.f1 >= 0.9, (noisy_report.tp, noisy_report.fp, noisy_report.fn)


def evidence_series(values):
    values = np.asarray(values, dtype=np.float64)
    idx = np.arange(len(values), dtype=np.int64) * 10
    return SimilaritySeries(
        frame_indices=idx, timestamps=idx.astype(np.float64), values=values
    )


@criterion("AC-4 sequential detector correctness (1e6 samples)", 30.0)
def test_ac4_cusum_streaming_and_spikes(capsys):
    rng = np.random.default_rng(4)
    baseline = 0.5
    evidence = rng.random(1_000_000)
    trace = cusum_trace(evidence, baseline)
    state = CusumState(0.0, 0)
    streamed = np.empty_like(trace)
    for i, value in enumerate(evidence.tolist()):
        state = cusum_step(state, value, baseline)
        streamed[i] = state.s
    assert np.array_equal(trace, streamed)
    assert state.t == len(evidence)

    # Evidence never above baseline: the statistic never leaves zero.
    quiet = rng.uniform(0.0, baseline, 1_000_000)
    assert not np.any(cusum_trace(quiet, baseline))

    # Isolated spikes: one-shot thresholding of e_t cries wolf, the
    # accumulator rides them out yet still catches a persistent shift.
    spikes = np.zeros(5_000)
    spikes[::100] = 0.9
    config = CusumConfig(baseline=0.3, alarm_threshold=1.0, significance=0.05)
    assert int(np.count_nonzero(spikes > config.baseline)) >= 1
    assert detect(evidence_series(spikes), config) is None
    persistent = spikes.copy()
    change_sample = 4_000
    persistent[change_sample:] = 0.9
    alarm_time = detect(evidence_series(persistent), config)
    assert alarm_time is not None
    assert alarm_time >= change_sample * 10.0


@criterion("AC-5 windowed similarity vs direct-summation oracle (1000 pairs)", 10.0)
def test_ac5_ssim_oracle(capsys):
    consts = SsimConstants()
    rng = np.random.default_rng(55)
    for case in range(1_000):
        h = int(rng.integers(8, 33))
        w = int(rng.integers(8, 33))
        a = rng.integers(0, 256, (h, w), dtype=np.uint8)
        if case % 2:
            b = np.clip(
                a.astype(np.int64) + rng.integers(-12, 13, (h, w)), 0, 255
            ).astype(np.uint8)
        else:
            b = rng.integers(0, 256, (h, w), dtype=np.uint8)
        got = ssim(a, b, consts)
        ref = ssim_direct(a, b, consts.window, consts.c1, consts.c2)
        assert abs(got - ref) < 1e-9
    for _ in range(100):
        a = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        b = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        assert ssim(a, a, consts) == 1.0
        assert abs(ssim(a, b, consts) - ssim(b, a, consts)) < 1e-12


@criterion("AC-6 smoothing reproduces polynomials (100 cases)", 5.0)
def test_ac6_savgol_polynomial_reproduction(capsys):
    rng = np.random.default_rng(6)
    for _ in range(100):
        window = int(rng.choice([5, 7, 9, 11, 13]))
        order = int(rng.integers(1, min(window - 1, 5)))
        degree = int(rng.integers(0, order + 1))
        n = window + int(rng.integers(0, 30))
        x = np.linspace(0.0, 1.0, n)
        coeffs = rng.uniform(-0.9, 0.9, degree + 1) / (degree + 1)
        values = np.polynomial.polynomial.polyval(x, coeffs)
        assert np.max(np.abs(values)) < 1.0
        series = SimilaritySeries(
            frame_indices=np.arange(n, dtype=np.int64) * 10,
            timestamps=x * 1000.0,
            values=values,
        )
        smoothed = savgol(series, window, order)
        np.testing.assert_allclose(smoothed.values, values, rtol=0, atol=1e-9)


@criterion("AC-7 background convergence and symmetry", 30.0)
def test_ac7_background_convergence(capsys, tmp_path):
    params = PipelineConfig().mixture_params()

    # Constant scene: the closed-form single-component recursion keeps the
    # mean at the input and decays the variance geometrically to the floor.
    model = MixtureModel(16, 16, params)
    steps = 50
    for _ in range(steps):
        model = update(model, np.full((16, 16), 100, dtype=np.uint8))
    rendered = render_background(model).luminance
    assert np.all(np.abs(rendered.astype(np.int64) - 100) <= 1)
    predicted_var = max(
        params.var_floor, params.var_init * (1.0 - params.learning_rate) ** (steps - 1)
    )
    np.testing.assert_allclose(model.variances[..., 0], predicted_var, rtol=1e-4)
    np.testing.assert_allclose(model.weights[..., 0], 1.0, rtol=1e-6)

    # Same but with bounded pixel noise: still within one luminance level.
    rng = np.random.default_rng(7)
    noisy_model = MixtureModel(16, 16, params)
    for _ in range(steps):
        frame = (100 + rng.integers(-3, 4, (16, 16))).astype(np.uint8)
        noisy_model = update(noisy_model, frame)
    noisy_rendered = render_background(noisy_model).luminance
    assert np.all(np.abs(noisy_rendered.astype(np.int64) - 100) <= 1)

    # Palindrome stream: the backward pass must mirror the forward pass
    # snapshot for snapshot, bit for bit.
    half = [rng.integers(0, 256, (24, 24), dtype=np.uint8) for _ in range(120)]
    manifest = write_video(tmp_path, half + half[::-1], subdir="palindrome")
    fwd = run_direction(manifest, "forward", 60, params)
    bwd = run_direction(manifest, "backward", 60, params)
    assert len(fwd) == len(bwd) == 4
    for j in range(4):
        assert np.array_equal(fwd[j].frame.luminance, bwd[3 - j].frame.luminance)


def random_cloud(rng):
    """Mixture of spread-out singles, a coincident pile, and tight repeats."""
    records = []

    def add(x, y, snap):
        records.append(
            DetectionRecord(
                snapshot_index=snap,
                class_id="car",
                confidence=float(round(rng.uniform(0.5, 1.0), 4)),
                box=Box(
                    x=float(int(x)),
                    y=float(int(y)),
                    w=float(int(rng.integers(5, 30))),
                    h=float(int(rng.integers(5, 25))),
                ),
            )
        )

    for _ in range(int(rng.integers(5, 25))):
        add(rng.integers(0, 300), rng.integers(0, 200), int(rng.integers(0, 6)))
    if rng.random() < 0.7:  # static-object pile
        px, py = int(rng.integers(0, 300)), int(rng.integers(0, 200))
        for _ in range(int(rng.integers(6, 20))):
            add(px + rng.integers(-2, 3), py + rng.integers(-2, 3), int(rng.integers(0, 6)))
    if rng.random() < 0.7:  # stalled-vehicle repeats
        sx, sy = int(rng.integers(0, 300)), int(rng.integers(0, 200))
        for snap in range(int(rng.integers(2, 6))):
            add(sx, sy, snap)
    return records


@criterion("AC-8 spatial filter oracles (100 clouds)", 60.0)
def test_ac8_filters_vs_brute_force(capsys):
    rng = np.random.default_rng(8)
    for _ in range(100):
        records = random_cloud(rng)
        points = [r.centroid for r in records]
        cloud = build_cloud(records)
        k_miss = int(rng.integers(1, 6))
        d_miss = float(rng.uniform(2.0, 12.0)) + 0.137
        k_slow = int(rng.integers(1, 4))
        d_slow = float(rng.uniform(5.0, 40.0)) + 0.137

        got_miss = filter_misclassified(records, k_miss, d_miss, cloud=cloud)
        want_miss = [
            r
            for r in records
            if (d := knn_brute(points, r.centroid, k_miss)) is None or d > d_miss
        ]
        assert got_miss == want_miss

        got_slow = filter_slow(records, k_slow, d_slow, cloud=cloud)
        want_slow = [
            r
            for r in records
            if (d := knn_brute(points, r.centroid, k_slow)) is not None and d < d_slow
        ]
        assert got_slow == want_slow

        assert nms(records, 0.5) == nms_oracle(records, 0.5)

        pts = np.asarray(points)
        previous = np.inf
        for k in range(1, min(6, len(pts)) + 1):
            _, _, wcss = kmeans(pts, k, seed=0)
            assert wcss <= previous + 1e-9
            previous = wcss
        first = kmeans(pts, min(3, len(pts)), seed=11)
        second = kmeans(pts, min(3, len(pts)), seed=11)
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])
        assert first[2] == second[2]


@criterion("AC-9 precision-delay integration", 1.0)
def test_ac9_apd_oracle(capsys):
    rng = np.random.default_rng(9)
    for _ in range(200):
        alphas = np.unique(rng.uniform(0.0, 1.0, int(rng.integers(1, 10))))
        points = tuple((float(a), float(rng.uniform(0.0, 1.0))) for a in alphas)
        expected = trapezoid_by_hand(list(points))
        curve = PrecisionDelayCurve(points=points, apd=expected, delay_cap_s=300.0)
        assert abs(apd(curve) - expected) < 1e-9
    # Constant precision integrates to itself; endpoints extend as constants.
    flat = PrecisionDelayCurve(
        points=((0.25, 0.7), (0.5, 0.7), (0.75, 0.7)), apd=0.7, delay_cap_s=300.0
    )
    assert abs(apd(flat) - 0.7) < 1e-12
    line = PrecisionDelayCurve(points=((0.0, 1.0), (1.0, 0.0)), apd=0.5, delay_cap_s=300.0)
    assert apd(line) == 0.5


@criterion("AC-10 deterministic prediction files", 120.0)
def test_ac10_run_determinism(capsys, tmp_path, monkeypatch):
    monkeypatch.delenv("STALL_SENTINEL_WORKERS", raising=False)
    spec = SceneSpec(
        width=64,
        height=48,
        duration_s=480.0,
        snapshot_interval=60,
        road_rects=((0, 8, 64, 32),),
        stalls=(
            StallEvent(x=10, y=10, w=12, h=8, onset_s=100.0),
            StallEvent(x=40, y=28, w=12, h=8, onset_s=160.0),
        ),
    )
    scene = generate(spec, tmp_path / "cam_det")
    outs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 8)):
        cfg = tmp_path / f"{tag}.cfg"
        cfg.write_text(
            "snapshot_interval = 60\nonset_threshold = 0.5\n"
            f"onset_persistence = 2\nworkers = {workers}\n"
        )
        out = tmp_path / f"predictions_{tag}.txt"
        code = main(
            ["run", str(scene.out_dir), "--config", str(cfg), "--out", str(out)]
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]  # same inputs, byte-identical reruns
    assert outs[0] == outs[2]  # worker count 1 vs 8 changes nothing
    assert len(load_predictions(tmp_path / "predictions_a.txt")) == 2
