"""Deterministic synthetic scene generator.

Renders a fixed-camera road scene (textured static layer, moving vehicles,
stalled vehicles) to PGM frames plus the sidecar files the pipeline
consumes: frame manifest, simulated detector output, road mask, and ground
truth onset times. Everything derives from the scene seed through keyed
counter-based generator streams, so identical specs produce identical
bytes.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .detections import Box, DetectionRecord, write_detections
from .errors import SceneSpecError
from .frames import FrameManifest, filter_corrupted, load_manifest
from .metrics import GroundTruthEvent, write_ground_truth
from .pgm import write_pgm
from .rng import DOMAIN_DETECTOR, DOMAIN_FRAME_NOISE, DOMAIN_STATIC, keyed_rng

STATIC_LAYERS = ("flat", "gradient", "lanes", "checker")
FRAME_NOISE_SIGMA = 2.0
STATIC_SPECKLE_SIGMA = 10.0


@dataclasses.dataclass(frozen=True)
class VehicleTrack:
    """A vehicle rectangle moving at constant velocity between enter_s and
    exit_s; it must stay inside the frame for that whole span."""

    x0: float
    y0: float
    w: float
    h: float
    vx: float
    vy: float
    enter_s: float
    exit_s: float
    luminance: int = 160

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise SceneSpecError(f"track box must be positive, got {self.w}x{self.h}")
        if not 0 <= self.enter_s < self.exit_s:
            raise SceneSpecError(
                f"track needs 0 <= enter_s < exit_s, got {self.enter_s}, {self.exit_s}"
            )
        if not 0 <= self.luminance <= 255:
            raise SceneSpecError(f"luminance must be in [0, 255], got {self.luminance}")

    def position(self, t_s: float) -> tuple[float, float]:
        return (
            self.x0 + self.vx * (t_s - self.enter_s),
            self.y0 + self.vy * (t_s - self.enter_s),
        )


@dataclasses.dataclass(frozen=True)
class StallEvent:
    """A vehicle rectangle that appears stopped at onset_s and stays until
    release_s (None = end of video)."""

    x: float
    y: float
    w: float
    h: float
    onset_s: float
    release_s: float | None = None
    luminance: int = 180

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise SceneSpecError(f"stall box must be positive, got {self.w}x{self.h}")
        if self.onset_s < 0:
            raise SceneSpecError(f"onset_s must be >= 0, got {self.onset_s}")
        if self.release_s is not None and self.release_s <= self.onset_s:
            raise SceneSpecError(
                f"release_s must exceed onset_s, got {self.release_s} vs {self.onset_s}"
            )
        if not 0 <= self.luminance <= 255:
            raise SceneSpecError(f"luminance must be in [0, 255], got {self.luminance}")

    @property
    def box(self) -> Box:
        return Box(self.x, self.y, self.w, self.h)


@dataclasses.dataclass(frozen=True)
class DetectorNoise:
    miss_rate: float = 0.0
    jitter_px: float = 0.0
    false_positive_rate: float = 0.0
    confidence_lo: float = 0.9
    confidence_hi: float = 1.0

    def __post_init__(self) -> None:
        for name in ("miss_rate", "false_positive_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SceneSpecError(f"{name} must be in [0, 1], got {value}")
        if self.jitter_px < 0:
            raise SceneSpecError(f"jitter_px must be >= 0, got {self.jitter_px}")
        if not 0.0 <= self.confidence_lo <= self.confidence_hi <= 1.0:
            raise SceneSpecError(
                "need 0 <= confidence_lo <= confidence_hi <= 1, got "
                f"{self.confidence_lo}, {self.confidence_hi}"
            )


@dataclasses.dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    duration_s: float
    effective_fps: float = 1.0
    static_layer: str = "lanes"
    tracks: tuple[VehicleTrack, ...] = ()
    stalls: tuple[StallEvent, ...] = ()
    detector_sim: DetectorNoise = DetectorNoise()
    corrupted_windows: tuple[tuple[float, float], ...] = ()
    road_rects: tuple[tuple[int, int, int, int], ...] = ()
    seed: int = 0
    snapshot_interval: int = 120
    sample_period_s: float = 30.0
    mean_threshold: float = 5.0

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise SceneSpecError(f"frame must be >= 8x8, got {self.width}x{self.height}")
        if self.duration_s <= 0:
            raise SceneSpecError(f"duration_s must be > 0, got {self.duration_s}")
        if self.effective_fps <= 0:
            raise SceneSpecError(f"effective_fps must be > 0, got {self.effective_fps}")
        if self.static_layer not in STATIC_LAYERS:
            raise SceneSpecError(
                f"static_layer must be one of {STATIC_LAYERS}, got {self.static_layer!r}"
            )
        if self.seed < 0:
            raise SceneSpecError(f"seed must be >= 0, got {self.seed}")
        if self.snapshot_interval < 1:
            raise SceneSpecError(
                f"snapshot_interval must be >= 1, got {self.snapshot_interval}"
            )
        if self.sample_period_s <= 0:
            raise SceneSpecError(
                f"sample_period_s must be > 0, got {self.sample_period_s}"
            )
        if not 0.0 <= self.mean_threshold <= 255.0:
            raise SceneSpecError(
                f"mean_threshold must be in [0, 255], got {self.mean_threshold}"
            )
        for start, end in self.corrupted_windows:
            if not 0 <= start < end <= self.duration_s:
                raise SceneSpecError(
                    f"corrupt window ({start}, {end}) must satisfy 0 <= start < end <= duration"
                )
        for rect in self.road_rects:
            x, y, w, h = rect
            if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                raise SceneSpecError(f"road rect {rect} exceeds frame bounds")
        for track in self.tracks:
            end = min(track.exit_s, self.duration_s)
            for t in (track.enter_s, end):
                x, y = track.position(t)
                if x < 0 or y < 0 or x + track.w > self.width or y + track.h > self.height:
                    raise SceneSpecError(
                        f"track leaves the frame at t={t}: ({x}, {y})"
                    )
        for stall in self.stalls:
            if stall.x < 0 or stall.y < 0 or stall.x + stall.w > self.width or stall.y + stall.h > self.height:
                raise SceneSpecError(f"stall box exceeds frame bounds: {stall}")
            if stall.onset_s >= self.duration_s:
                raise SceneSpecError(
                    f"stall onset {stall.onset_s} is past the video end {self.duration_s}"
                )
            if stall.release_s is not None and stall.release_s > self.duration_s:
                raise SceneSpecError(
                    f"stall release {stall.release_s} is past the video end {self.duration_s}"
                )

    @property
    def frame_count(self) -> int:
        return int(round(self.duration_s * self.effective_fps))

    @property
    def snapshot_interval_s(self) -> float:
        return self.snapshot_interval / self.effective_fps


@dataclasses.dataclass(frozen=True)
class GeneratedScene:
    video_id: str
    out_dir: Path
    manifest_path: Path
    detections_path: Path
    mask_path: Path
    ground_truth_path: Path
    manifest: FrameManifest
    survivors: FrameManifest
    detections: tuple[DetectionRecord, ...]


def render_static_layer(spec: SceneSpec) -> np.ndarray:
    """Base luminance pattern plus seeded speckle; fixed across frames so
    the scene has texture for the similarity stage to grip."""
    h, w = spec.height, spec.width
    if spec.static_layer == "flat":
        base = np.full((h, w), 60.0)
    elif spec.static_layer == "gradient":
        base = np.tile(np.linspace(30.0, 120.0, w), (h, 1))
    elif spec.static_layer == "checker":
        yy, xx = np.mgrid[0:h, 0:w]
        base = np.where(((yy // 16) + (xx // 16)) % 2 == 0, 40.0, 90.0)
    else:  # lanes
        base = np.full((h, w), 55.0)
        for row in range(0, h, 48):
            for col in range(0, w, 40):
                base[row : row + 2, col : col + 24] = 200.0
    rng = keyed_rng(spec.seed, DOMAIN_STATIC)
    speckle = rng.standard_normal((h, w)) * STATIC_SPECKLE_SIGMA
    return np.clip(np.rint(base + speckle), 0, 255).astype(np.uint8)


def _px(value: float) -> int:
    return int(math.floor(value + 0.5))


def _draw_vehicle(canvas: np.ndarray, x: float, y: float, w: float, h: float, lum: int) -> None:
    """Filled rectangle with a contrasting inner band (roof/windshield), so
    a vehicle is structurally distinct from any flat background patch."""
    height, width = canvas.shape
    px, py = _px(x), _px(y)
    pw, ph = max(_px(w), 1), max(_px(h), 1)
    x0, x1 = max(px, 0), min(px + pw, width)
    y0, y1 = max(py, 0), min(py + ph, height)
    if x0 >= x1 or y0 >= y1:
        return
    canvas[y0:y1, x0:x1] = lum
    accent = lum - 60 if lum >= 128 else lum + 60
    ax0, ax1 = max(px + pw // 4, 0), min(px + (3 * pw) // 4, width)
    ay0, ay1 = max(py + ph // 3, 0), min(py + (2 * ph) // 3, height)
    if ax0 < ax1 and ay0 < ay1:
        canvas[ay0:ay1, ax0:ax1] = accent


def render_frame(spec: SceneSpec, static: np.ndarray, frame_index: int) -> np.ndarray:
    """Single frame: vehicles over the static layer plus per-frame noise;
    all-zero when the timestamp falls in a corrupted window."""
    t = frame_index / spec.effective_fps
    for start, end in spec.corrupted_windows:
        if start <= t < end:
            return np.zeros_like(static)
    canvas = static.copy()
    for track in spec.tracks:
        if track.enter_s <= t < track.exit_s:
            x, y = track.position(t)
            _draw_vehicle(canvas, x, y, track.w, track.h, track.luminance)
    for stall in spec.stalls:
        release = stall.release_s if stall.release_s is not None else math.inf
        if stall.onset_s <= t < release:
            _draw_vehicle(canvas, stall.x, stall.y, stall.w, stall.h, stall.luminance)
    rng = keyed_rng(spec.seed, DOMAIN_FRAME_NOISE, frame_index)
    noise = rng.standard_normal(canvas.shape, dtype=np.float32)
    noisy = canvas.astype(np.float32) + noise * np.float32(FRAME_NOISE_SIGMA)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def render_mask(spec: SceneSpec) -> np.ndarray:
    mask = np.zeros((spec.height, spec.width), dtype=np.uint8)
    for x, y, w, h in spec.road_rects:
        mask[y : y + h, x : x + w] = 255
    return mask


def simulate_detections(
    spec: SceneSpec,
    survivors: FrameManifest,
    noise: DetectorNoise | None = None,
) -> list[DetectionRecord]:
    """Detector output per background-snapshot slot over the
    corruption-filtered frame timeline.

    A stall is reported at slot j when it has been stationary for at least
    one snapshot interval by the slot's last frame and has not been
    released. All noise draws happen in a fixed order per slot (miss,
    jitter x, jitter y, confidence per stall, then the false-positive
    draw), so a given seed perturbs a given stall identically regardless of
    outcomes.
    """
    if noise is None:
        noise = spec.detector_sim
    interval = spec.snapshot_interval
    interval_s = spec.snapshot_interval_s
    total = len(survivors.entries) // interval
    conf_span = noise.confidence_hi - noise.confidence_lo
    records: list[DetectionRecord] = []
    for j in range(total):
        slot = survivors.entries[j * interval : (j + 1) * interval]
        t_end = slot[-1].timestamp_s
        rng = keyed_rng(spec.seed, DOMAIN_DETECTOR, j)
        for stall in spec.stalls:
            u_miss = rng.random()
            jx = rng.standard_normal()
            jy = rng.standard_normal()
            u_conf = rng.random()
            stationary = stall.onset_s <= t_end - interval_s
            present = stall.release_s is None or stall.release_s > t_end
            if not (stationary and present) or u_miss < noise.miss_rate:
                continue
            records.append(
                DetectionRecord(
                    snapshot_index=j,
                    class_id="car",
                    confidence=noise.confidence_lo + u_conf * conf_span,
                    box=Box(
                        stall.x + noise.jitter_px * jx,
                        stall.y + noise.jitter_px * jy,
                        stall.w,
                        stall.h,
                    ),
                )
            )
        if rng.random() < noise.false_positive_rate:
            fw = 10.0 + 30.0 * rng.random()
            fh = 8.0 + 20.0 * rng.random()
            records.append(
                DetectionRecord(
                    snapshot_index=j,
                    class_id="car",
                    confidence=noise.confidence_lo + rng.random() * conf_span,
                    box=Box(
                        rng.random() * (spec.width - fw),
                        rng.random() * (spec.height - fh),
                        fw,
                        fh,
                    ),
                )
            )
    return records


def generate(spec: SceneSpec, out_dir: str | Path) -> GeneratedScene:
    """Render the scene into out_dir: frames/, manifest.txt, detections.csv,
    mask.pgm, ground_truth.txt. Deterministic for a given spec."""
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    try:
        frames_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SceneSpecError(f"cannot create output directory {out_dir}: {exc}") from exc

    static = render_static_layer(spec)
    manifest_lines = []
    for i in range(spec.frame_count):
        frame = render_frame(spec, static, i)
        rel = f"frames/frame_{i:06d}.pgm"
        write_pgm(out_dir / rel, frame)
        manifest_lines.append(f"{i} {i / spec.effective_fps:.6f} {rel}")
    manifest_path = out_dir / "manifest.txt"
    manifest_path.write_text(
        "".join(line + "\n" for line in manifest_lines), encoding="utf-8"
    )

    mask_path = out_dir / "mask.pgm"
    write_pgm(mask_path, render_mask(spec))

    manifest = load_manifest(manifest_path)
    survivors = filter_corrupted(
        manifest, mean_threshold=spec.mean_threshold, sample_period_s=spec.sample_period_s
    )
    detections = simulate_detections(spec, survivors)
    detections_path = out_dir / "detections.csv"
    write_detections(detections_path, detections)

    video_id = out_dir.name
    ground_truth_path = out_dir / "ground_truth.txt"
    write_ground_truth(
        ground_truth_path,
        [
            GroundTruthEvent(video_id, stall.onset_s, stall.release_s)
            for stall in spec.stalls
        ],
    )
    return GeneratedScene(
        video_id=video_id,
        out_dir=out_dir,
        manifest_path=manifest_path,
        detections_path=detections_path,
        mask_path=mask_path,
        ground_truth_path=ground_truth_path,
        manifest=manifest,
        survivors=survivors,
        detections=tuple(detections),
    )


def _format_float(value: float) -> str:
    return repr(float(value))


def format_scene_spec(spec: SceneSpec) -> str:
    """Canonical text form; parse_scene_spec round-trips it exactly."""
    lines = [
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"duration_s = {_format_float(spec.duration_s)}",
        f"effective_fps = {_format_float(spec.effective_fps)}",
        f"static_layer = {spec.static_layer}",
        f"seed = {spec.seed}",
        f"snapshot_interval = {spec.snapshot_interval}",
        f"sample_period_s = {_format_float(spec.sample_period_s)}",
        f"mean_threshold = {_format_float(spec.mean_threshold)}",
        f"miss_rate = {_format_float(spec.detector_sim.miss_rate)}",
        f"jitter_px = {_format_float(spec.detector_sim.jitter_px)}",
        f"false_positive_rate = {_format_float(spec.detector_sim.false_positive_rate)}",
        f"confidence_lo = {_format_float(spec.detector_sim.confidence_lo)}",
        f"confidence_hi = {_format_float(spec.detector_sim.confidence_hi)}",
    ]
    for x, y, w, h in spec.road_rects:
        lines.append(f"road = {x} {y} {w} {h}")
    for start, end in spec.corrupted_windows:
        lines.append(f"corrupt = {_format_float(start)} {_format_float(end)}")
    for t in spec.tracks:
        lines.append(
            "track = "
            + " ".join(
                _format_float(v)
                for v in (t.x0, t.y0, t.w, t.h, t.vx, t.vy, t.enter_s, t.exit_s)
            )
            + f" {t.luminance}"
        )
    for s in spec.stalls:
        release = "-" if s.release_s is None else _format_float(s.release_s)
        lines.append(
            "stall = "
            + " ".join(_format_float(v) for v in (s.x, s.y, s.w, s.h, s.onset_s))
            + f" {release} {s.luminance}"
        )
    return "".join(line + "\n" for line in lines)


_SCALAR_KEYS = {
    "width": int,
    "height": int,
    "duration_s": float,
    "effective_fps": float,
    "static_layer": str,
    "seed": int,
    "snapshot_interval": int,
    "sample_period_s": float,
    "mean_threshold": float,
    "miss_rate": float,
    "jitter_px": float,
    "false_positive_rate": float,
    "confidence_lo": float,
    "confidence_hi": float,
}

_NOISE_KEYS = (
    "miss_rate",
    "jitter_px",
    "false_positive_rate",
    "confidence_lo",
    "confidence_hi",
)


def parse_scene_spec(text: str, source: str = "<string>") -> SceneSpec:
    """Parse the line-oriented `key = value` scene grammar.

    Repeatable entries:
      road = <x> <y> <w> <h>
      corrupt = <start_s> <end_s>
      track = <x0> <y0> <w> <h> <vx> <vy> <enter_s> <exit_s> <luminance>
      stall = <x> <y> <w> <h> <onset_s> <release_s|-> <luminance>
    """
    scalars: dict[str, object] = {}
    roads: list[tuple[int, int, int, int]] = []
    corrupts: list[tuple[float, float]] = []
    tracks: list[VehicleTrack] = []
    stalls: list[StallEvent] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not sep or not key:
            raise SceneSpecError(f"{source}:{lineno}: expected `key = value`, got {line!r}")
        try:
            if key == "road":
                fields = raw.split()
                if len(fields) != 4:
                    raise SceneSpecError("road needs 4 fields: x y w h")
                roads.append(tuple(int(f) for f in fields))
            elif key == "corrupt":
                fields = raw.split()
                if len(fields) != 2:
                    raise SceneSpecError("corrupt needs 2 fields: start_s end_s")
                corrupts.append((float(fields[0]), float(fields[1])))
            elif key == "track":
                fields = raw.split()
                if len(fields) != 9:
                    raise SceneSpecError(
                        "track needs 9 fields: x0 y0 w h vx vy enter_s exit_s luminance"
                    )
                tracks.append(
                    VehicleTrack(
                        *(float(f) for f in fields[:8]), luminance=int(fields[8])
                    )
                )
            elif key == "stall":
                fields = raw.split()
                if len(fields) != 7:
                    raise SceneSpecError(
                        "stall needs 7 fields: x y w h onset_s release_s|- luminance"
                    )
                release = None if fields[5] == "-" else float(fields[5])
                stalls.append(
                    StallEvent(
                        *(float(f) for f in fields[:5]),
                        release_s=release,
                        luminance=int(fields[6]),
                    )
                )
            elif key in _SCALAR_KEYS:
                if key in scalars:
                    raise SceneSpecError(f"duplicate key {key!r}")
                scalars[key] = _SCALAR_KEYS[key](raw)
            else:
                raise SceneSpecError(f"unrecognized key {key!r}")
        except (ValueError, SceneSpecError) as exc:
            raise SceneSpecError(f"{source}:{lineno}: {exc}") from exc
    missing = [k for k in ("width", "height", "duration_s") if k not in scalars]
    if missing:
        raise SceneSpecError(f"{source}: missing required keys {missing}")
    noise_kwargs = {k: scalars.pop(k) for k in _NOISE_KEYS if k in scalars}
    return SceneSpec(
        tracks=tuple(tracks),
        stalls=tuple(stalls),
        detector_sim=DetectorNoise(**noise_kwargs),
        corrupted_windows=tuple(corrupts),
        road_rects=tuple(roads),
        **scalars,
    )


def load_scene_spec(path: str | Path) -> SceneSpec:
    return parse_scene_spec(Path(path).read_text(encoding="utf-8"), source=str(path))
