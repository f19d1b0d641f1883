"""Per-pixel Gaussian-mixture background modeling (MOG2 style).

The model keeps up to max_components Gaussians per pixel, updated online
and kept sorted by weight/sigma descending. Snapshots of the rendered
background are emitted at a fixed frame interval, in both playback
directions, and merged half/half: a stalled vehicle is absent from early
backward snapshots and present in late forward ones, so each half uses the
direction that has not yet absorbed it.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import BackgroundError
from .frames import Frame, FrameManifest, read_frame
from .pgm import write_pgm

DIRECTIONS = ("forward", "backward")


@dataclasses.dataclass(frozen=True)
class MixtureParams:
    """Tunables for the per-pixel mixture update.

    match_threshold_sq is the squared normalized distance for the match test
    (9.0 = three sigmas); background_ratio is the cumulative weight needed
    before components stop counting as background.
    """

    max_components: int = 5
    learning_rate: float = 0.05
    var_init: float = 225.0
    var_floor: float = 4.0
    match_threshold_sq: float = 9.0
    background_ratio: float = 0.9

    def __post_init__(self) -> None:
        if not 1 <= self.max_components <= 16:
            raise BackgroundError(f"max_components must be in [1,16], got {self.max_components}")
        if not 0.0 < self.learning_rate < 1.0:
            raise BackgroundError(f"learning_rate must be in (0,1), got {self.learning_rate}")
        if self.var_init <= 0 or self.var_floor <= 0:
            raise BackgroundError("var_init and var_floor must be positive")
        if self.match_threshold_sq <= 0:
            raise BackgroundError("match_threshold_sq must be positive")
        if not 0.0 < self.background_ratio < 1.0:
            raise BackgroundError(
                f"background_ratio must be in (0,1), got {self.background_ratio}"
            )


@dataclasses.dataclass(frozen=True)
class GaussianComponent:
    mean: float
    variance: float
    weight: float


class MixtureModel:
    """Mutable per-pixel mixture state. Single writer; see update()."""

    def __init__(self, width: int, height: int, params: MixtureParams | None = None):
        self.params = params or MixtureParams()
        self.width = width
        self.height = height
        k = self.params.max_components
        self.means = np.zeros((height, width, k), dtype=np.float32)
        self.variances = np.zeros((height, width, k), dtype=np.float32)
        self.weights = np.zeros((height, width, k), dtype=np.float32)
        self.inv_sigma = np.zeros((height, width, k), dtype=np.float32)
        self.counts = np.zeros((height, width), dtype=np.int32)

    def components_at(self, x: int, y: int) -> list[GaussianComponent]:
        """Active components of pixel (x, y), heaviest-normalized first."""
        n = int(self.counts[y, x])
        return [
            GaussianComponent(
                mean=float(self.means[y, x, i]),
                variance=float(self.variances[y, x, i]),
                weight=float(self.weights[y, x, i]),
            )
            for i in range(n)
        ]


def update(model: MixtureModel, frame: Frame | np.ndarray) -> MixtureModel:
    """Advance the model by one frame (in place; returns the model)."""
    pixels = frame.luminance if isinstance(frame, Frame) else frame
    if pixels.shape != (model.height, model.width):
        raise BackgroundError(
            f"frame is {pixels.shape[1]}x{pixels.shape[0]}, model is "
            f"{model.width}x{model.height}"
        )
    p = model.params
    _kernels.mog2_update(
        model.means,
        model.variances,
        model.weights,
        model.inv_sigma,
        model.counts,
        np.ascontiguousarray(pixels, dtype=np.uint8),
        p.learning_rate,
        p.match_threshold_sq,
        p.var_init,
        p.var_floor,
    )
    return model


def render_background(model: MixtureModel, frame_index: int = 0, timestamp_s: float = 0.0) -> Frame:
    """Render the background: per pixel, the weighted mean of the first B
    components, B minimal with cumulative weight > background_ratio."""
    if int(model.counts.min()) < 1:
        raise BackgroundError("cannot render: some pixels have no components yet")
    ratio = model.params.background_ratio
    cum_w = np.cumsum(model.weights, axis=2)
    cum_wm = np.cumsum(model.weights * model.means, axis=2)
    exceeded = cum_w > np.float32(ratio)
    b = np.where(exceeded.any(axis=2), exceeded.argmax(axis=2), model.counts - 1)[..., None]
    den = np.take_along_axis(cum_w, b, axis=2)[..., 0].astype(np.float64)
    num = np.take_along_axis(cum_wm, b, axis=2)[..., 0].astype(np.float64)
    values = np.clip(np.floor(num / den + 0.5), 0.0, 255.0).astype(np.uint8)
    return Frame(frame_index=frame_index, timestamp_s=timestamp_s, luminance=values)


@dataclasses.dataclass(frozen=True)
class BackgroundSnapshot:
    frame: Frame
    snapshot_index: int
    source_frame_index: int
    direction: str


def run_direction(
    manifest: FrameManifest,
    direction: str,
    snapshot_interval: int,
    params: MixtureParams | None = None,
) -> list[BackgroundSnapshot]:
    """Feed all frames in one direction, emitting a snapshot every
    snapshot_interval fed frames.

    Backward snapshots are re-indexed onto the original timeline, so for
    both directions snapshot j is the j-th snapshot position in source
    order and the returned list is ascending in snapshot_index.
    """
    if direction not in DIRECTIONS:
        raise BackgroundError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if snapshot_interval < 1:
        raise BackgroundError(f"snapshot_interval must be >= 1, got {snapshot_interval}")
    if not manifest.entries:
        raise BackgroundError("manifest is empty")

    entries = manifest.entries if direction == "forward" else manifest.entries[::-1]
    first = read_frame(manifest, entries[0].frame_index)
    model = MixtureModel(first.width, first.height, params)

    emitted: list[BackgroundSnapshot] = []
    for fed, entry in enumerate(entries, start=1):
        frame = read_frame(manifest, entry.frame_index)
        update(model, frame)
        if fed % snapshot_interval == 0:
            emitted.append(
                BackgroundSnapshot(
                    frame=render_background(model, entry.frame_index, entry.timestamp_s),
                    snapshot_index=len(emitted),
                    source_frame_index=entry.frame_index,
                    direction=direction,
                )
            )
    if direction == "backward":
        total = len(emitted)
        emitted = [
            dataclasses.replace(snap, snapshot_index=total - 1 - snap.snapshot_index)
            for snap in emitted
        ]
        emitted.reverse()
    return emitted


def merge(
    forward: list[BackgroundSnapshot], backward: list[BackgroundSnapshot]
) -> list[BackgroundSnapshot]:
    """Half-split merge: backward snapshots for the first half of the
    timeline (j < J//2), forward for the rest."""
    if len(forward) != len(backward):
        raise BackgroundError(
            f"direction snapshot counts differ: {len(forward)} forward vs "
            f"{len(backward)} backward"
        )
    total = len(forward)
    merged: list[BackgroundSnapshot] = []
    for j, (fwd, bwd) in enumerate(zip(forward, backward)):
        # Slot j spans the same frames in both lists; forward stamps it with
        # the slot's last source frame, backward with its first.
        if fwd.snapshot_index != j or bwd.snapshot_index != j:
            raise BackgroundError(f"snapshot lists misaligned at position {j}")
        merged.append(dataclasses.replace(bwd if j < total // 2 else fwd, direction="merged"))
    return merged


def write_snapshots(snapshots: list[BackgroundSnapshot], out_dir: str | Path) -> list[Path]:
    """Dump snapshots as bg_<direction>_<snapshot_index>.pgm files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in snapshots:
        path = out_dir / f"bg_{snap.direction}_{snap.snapshot_index}.pgm"
        write_pgm(path, snap.frame.luminance)
        paths.append(path)
    return paths
