import numpy as np
import pytest

from stall_sentinel.errors import SequentialError
from stall_sentinel.sequential import (
    AnomalyAlarm,
    Calibration,
    CusumConfig,
    CusumState,
    analyze,
    calibrate_baseline,
    cusum_step,
    cusum_trace,
    decrease_offset,
    detect,
    localize,
    normalize_evidence,
    read_calibration,
    write_calibration,
)
from stall_sentinel.similarity import SimilaritySeries

import oracles


def series(values, dt=10.0):
    n = len(values)
    return SimilaritySeries(
        frame_indices=np.arange(0, n * 10, 10, dtype=np.int64),
        timestamps=np.arange(n, dtype=np.float64) * dt,
        values=np.asarray(values, dtype=np.float64),
    )


# --- config / state ------------------------------------------------------------

def test_config_defaults_localize_to_baseline():
    cfg = CusumConfig(baseline=0.3)
    assert cfg.localize_threshold == 0.3
    cfg = CusumConfig(baseline=0.3, localize_threshold=0.6)
    assert cfg.localize_threshold == 0.6


def test_config_validation():
    with pytest.raises(SequentialError):
        CusumConfig(baseline=1.5)
    with pytest.raises(SequentialError):
        CusumConfig(baseline=0.5, alarm_threshold=0.0)
    with pytest.raises(SequentialError):
        CusumConfig(baseline=0.5, significance=1.0)


def test_state_validation():
    with pytest.raises(SequentialError):
        CusumState(s=-0.1)
    with pytest.raises(SequentialError):
        CusumState(t=-1)


# --- calibration ----------------------------------------------------------------

def test_calibrate_worked_example():
    # Normalized scores {0, .2, .4, .6, .8, 1.0}; zeros dropped leaves five
    # values; the 80th-percentile nearest rank is the 4th: 0.8.
    scores = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    cal = calibrate_baseline(scores, significance=0.2)
    assert cal.baseline == pytest.approx(0.8)
    assert cal.norm_min == 0.0 and cal.norm_max == 1.0
    assert cal.significance == 0.2


def test_calibrate_normalizes_first():
    # The same example shifted and scaled: constants recorded, baseline
    # identical in normalized units.
    scores = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0]) * 50.0 + 10.0
    cal = calibrate_baseline(scores, significance=0.2)
    assert cal.baseline == pytest.approx(0.8)
    assert cal.norm_min == 10.0 and cal.norm_max == 60.0


def test_calibrate_matches_nearest_rank_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(3, 200))
        scores = rng.uniform(0.01, 1.0, size=n)
        sig = float(rng.uniform(0.01, 0.5))
        cal = calibrate_baseline(scores, significance=sig)
        lo, hi = scores.min(), scores.max()
        normalized = sorted(v for v in ((scores - lo) / (hi - lo)).tolist() if v != 0.0)
        assert cal.baseline == pytest.approx(
            oracles.percentile_nearest_rank(normalized, 1.0 - sig), abs=1e-12
        )


def test_calibrate_errors():
    with pytest.raises(SequentialError, match="empty"):
        calibrate_baseline(np.array([]))
    with pytest.raises(SequentialError, match="all zero"):
        calibrate_baseline(np.zeros(5))
    with pytest.raises(SequentialError, match="finite"):
        calibrate_baseline(np.array([0.1, np.nan]))
    with pytest.raises(SequentialError, match="significance"):
        calibrate_baseline(np.array([0.1, 0.2]), significance=0.0)


def test_calibrate_constant_scores_degenerate():
    with pytest.warns(UserWarning, match="constant"):
        cal = calibrate_baseline(np.full(10, 3.5))
    assert cal.baseline == 1.0
    assert cal.norm_min == cal.norm_max == 3.5
    # The paired normalizer sends everything to zero, so the detector stays
    # quiet rather than alarming on noise.
    assert np.all(normalize_evidence(np.array([0.0, 3.5, 9.9]), cal) == 0.0)


def test_normalize_evidence_clips():
    cal = Calibration(baseline=0.5, norm_min=2.0, norm_max=4.0, significance=0.05)
    got = normalize_evidence(np.array([1.0, 2.0, 3.0, 4.0, 9.0]), cal)
    assert got.tolist() == [0.0, 0.0, 0.5, 1.0, 1.0]


# --- cusum recursion ------------------------------------------------------------

def test_cusum_worked_example():
    # baseline .2, evidence [.5, .1, .6] -> s = [.3, .2, .6].
    trace = cusum_trace(np.array([0.5, 0.1, 0.6]), baseline=0.2)
    assert np.allclose(trace, [0.3, 0.2, 0.6], atol=1e-12)


def test_cusum_step_streaming_matches_trace():
    rng = np.random.default_rng(1)
    values = rng.uniform(0, 1, 500)
    trace = cusum_trace(values, baseline=0.4)
    state = CusumState()
    for i, e in enumerate(values):
        state = cusum_step(state, float(e), 0.4)
        assert state.s == trace[i]
        assert state.t == i + 1


def test_cusum_matches_python_fold():
    rng = np.random.default_rng(2)
    values = rng.uniform(0, 1, 300)
    trace = cusum_trace(values, baseline=0.35)
    assert trace.tolist() == oracles.cusum_fold(values, 0.35)


def test_cusum_zero_drift_at_baseline():
    # Evidence exactly at the baseline accumulates nothing, forever.
    values = np.full(1000, 0.3)
    trace = cusum_trace(values, baseline=0.3)
    assert np.all(trace == 0.0)


def test_cusum_never_negative():
    rng = np.random.default_rng(3)
    trace = cusum_trace(rng.uniform(0, 1, 200), baseline=0.9)
    assert np.all(trace >= 0.0)


def test_cusum_step_validates_evidence():
    with pytest.raises(SequentialError, match="evidence"):
        cusum_step(CusumState(), 1.5, 0.2)


# --- detection ---------------------------------------------------------------------

def test_detect_worked_example():
    # Trace [.3, .2, .6] crosses h=.5 at the third sample (t=20).
    s = series([0.5, 0.1, 0.6])
    cfg = CusumConfig(baseline=0.2, alarm_threshold=0.5)
    assert detect(s, cfg) == 20.0


def test_detect_no_alarm():
    s = series([0.1, 0.1, 0.1])
    assert detect(s, CusumConfig(baseline=0.2, alarm_threshold=0.5)) is None


def test_detect_threshold_is_inclusive():
    # 0.75 - 0.25 = 0.5 exactly in binary; the alarm fires at s == h.
    s = series([0.75])
    assert detect(s, CusumConfig(baseline=0.25, alarm_threshold=0.5)) == 0.0


# --- localization ---------------------------------------------------------------------

def test_decrease_offset_worked_example():
    # Statistic rises through T+4 then falls for 3 samples: the sustained
    # decline starts at offset 5, so M = 4.
    trace = np.array([0.0, 1.2, 1.5, 1.9, 2.4, 2.8, 2.6, 2.3, 2.1])
    assert decrease_offset(trace, alarm_position=1) == 4


def test_decrease_offset_ignores_single_dips():
    # A one-sample dip at offset 2 does not end the window.
    trace = np.array([1.0, 1.4, 1.2, 1.6, 1.5, 1.3])
    assert decrease_offset(trace, alarm_position=0) == 3


def test_decrease_offset_no_decline_runs_to_end():
    trace = np.array([1.0, 1.2, 1.4, 1.6])
    assert decrease_offset(trace, alarm_position=1) == 2


def test_decrease_offset_validation():
    with pytest.raises(SequentialError, match="outside"):
        decrease_offset(np.array([1.0, 2.0]), alarm_position=5)


def test_localize_flags_high_evidence_in_window():
    vals = [0.1, 0.1, 0.9, 0.9, 0.8, 0.7, 0.6, 0.3, 0.1, 0.1]
    s = series(vals)
    cfg = CusumConfig(baseline=0.2, alarm_threshold=1.0, localize_threshold=0.5)
    alarm = analyze(s, cfg)
    assert alarm is not None
    # Trace: 0,0,.7,1.4,2.0,2.5,2.9,3.0,2.9,2.8 -> alarm at position 3,
    # sustained decline starts at offset 5, M=4, window positions 3..7.
    assert alarm.detection_time == 30.0
    assert alarm.decrease_offset == 4
    assert alarm.localized_frames == (30, 40, 50, 60)


def test_localize_decrease_offset_from_trace():
    vals = [0.1, 0.1, 0.9, 0.9, 0.8, 0.7, 0.6, 0.3, 0.1, 0.1]
    s = series(vals)
    trace = cusum_trace(s.values, 0.2)
    frames = localize(s, trace, detection_time=30.0, localize_threshold=0.85)
    assert frames == [30]  # only the .9 samples clear .85


def test_localize_validation():
    s = series([0.5, 0.6])
    trace = cusum_trace(s.values, 0.1)
    with pytest.raises(SequentialError, match="not in series"):
        localize(s, trace, detection_time=99.0, localize_threshold=0.5)
    with pytest.raises(SequentialError, match="length"):
        localize(s, trace[:1], detection_time=0.0, localize_threshold=0.5)


def test_analyze_none_when_quiet():
    s = series([0.1] * 20)
    assert analyze(s, CusumConfig(baseline=0.2, alarm_threshold=1.0)) is None


def test_analyze_spike_vs_persistent_shift():
    # Isolated spikes above the baseline but below baseline+h never alarm;
    # the same level sustained does. This is the argument for CUSUM over
    # per-sample thresholding.
    baseline, h = 0.3, 1.0
    spikes = [0.9 if i % 10 == 0 else 0.0 for i in range(100)]
    assert analyze(series(spikes), CusumConfig(baseline=baseline, alarm_threshold=h)) is None
    persistent = [0.0] * 50 + [0.9] * 50
    alarm = analyze(series(persistent), CusumConfig(baseline=baseline, alarm_threshold=h))
    assert alarm is not None
    # ceil(1.0 / (0.9 - 0.3)) = 2 samples after the shift.
    assert alarm.detection_time == series(persistent).timestamps[51]


# --- calibration artifact -----------------------------------------------------------

def test_artifact_round_trip(tmp_path):
    cal = Calibration(
        baseline=0.8123456789012345,
        norm_min=0.037,
        norm_max=0.91,
        significance=0.05,
    )
    path = tmp_path / "calibration.txt"
    write_calibration(path, cal)
    back = read_calibration(path)
    assert back == cal  # repr round-trip is exact


def test_artifact_wire_format(tmp_path):
    cal = Calibration(baseline=0.5, norm_min=0.0, norm_max=1.0, significance=0.05)
    path = tmp_path / "calibration.txt"
    write_calibration(path, cal)
    lines = path.read_text().splitlines()
    assert lines == ["gamma=0.5", "norm_min=0.0", "norm_max=1.0", "alpha=0.05"]


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("gamma=0.5\nnorm_min=0\nnorm_max=1\n", "missing"),
        ("gamma=0.5\ngamma=0.6\nnorm_min=0\nnorm_max=1\nalpha=0.05\n", "duplicate"),
        ("gamma=0.5\nbogus=1\nnorm_min=0\nnorm_max=1\nalpha=0.05\n", "unrecognized"),
        ("gamma=abc\nnorm_min=0\nnorm_max=1\nalpha=0.05\n", "bad float"),
    ],
)
def test_artifact_parse_errors(tmp_path, text, fragment):
    path = tmp_path / "calibration.txt"
    path.write_text(text)
    with pytest.raises(SequentialError, match=fragment):
        read_calibration(path)


def test_artifact_comments_allowed(tmp_path):
    path = tmp_path / "calibration.txt"
    path.write_text("# baseline\ngamma=0.5\nnorm_min=0\nnorm_max=1\nalpha=0.05\n")
    cal = read_calibration(path)
    assert cal.baseline == 0.5
