"""Frame ingestion: manifests, frame reads, and corrupted-window filtering.

A video is a directory of PGM/PPM files plus a manifest listing
`<frame_index> <timestamp_s> <relative_path>` per line. Pixel data is
single-channel 8-bit luminance; color input is converted at read time.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .pgm import read_pgm

MIN_FRAME_SIDE = 8  # the similarity window must fit


@dataclasses.dataclass(frozen=True)
class Frame:
    """A single grayscale frame. The pixel array is locked after construction."""

    frame_index: int
    timestamp_s: float
    luminance: np.ndarray

    def __post_init__(self) -> None:
        if self.luminance.ndim != 2 or self.luminance.dtype != np.uint8:
            raise ManifestError(
                f"frame {self.frame_index}: luminance must be a 2-D uint8 array"
            )
        h, w = self.luminance.shape
        if h < MIN_FRAME_SIDE or w < MIN_FRAME_SIDE:
            raise ManifestError(
                f"frame {self.frame_index}: {w}x{h} is below the {MIN_FRAME_SIDE} px minimum"
            )
        self.luminance.setflags(write=False)

    @property
    def width(self) -> int:
        return self.luminance.shape[1]

    @property
    def height(self) -> int:
        return self.luminance.shape[0]


@dataclasses.dataclass(frozen=True)
class ManifestEntry:
    frame_index: int
    timestamp_s: float
    path: str


@dataclasses.dataclass
class FrameManifest:
    """Ordered, timestamped index of a video's extracted frames."""

    entries: tuple[ManifestEntry, ...]
    base_dir: Path
    effective_fps: float = 1.0

    def __post_init__(self) -> None:
        if self.effective_fps <= 0:
            raise ManifestError(f"effective_fps must be > 0, got {self.effective_fps}")
        self._by_index = {e.frame_index: e for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, frame_index: int) -> ManifestEntry:
        try:
            return self._by_index[frame_index]
        except KeyError:
            raise ManifestError(f"frame index {frame_index} not in manifest") from None


def _derive_fps(timestamps: list[float]) -> float:
    if len(timestamps) < 2:
        return 1.0
    deltas = np.diff(np.asarray(timestamps, dtype=np.float64))
    median = float(np.median(deltas))
    return 1.0 / median if median > 0 else 1.0


def load_manifest(path: str | Path) -> FrameManifest:
    """Parse a manifest file. Entries come back sorted by frame_index.

    Raises ManifestError naming the offending line for malformed fields,
    duplicate indices, or timestamps that do not increase with frame index.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"{path}: unreadable: {exc}") from exc

    entries: list[ManifestEntry] = []
    seen: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ManifestError(f"{path}: line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            idx = int(parts[0])
            ts = float(parts[1])
        except ValueError:
            raise ManifestError(f"{path}: line {lineno}: bad index or timestamp") from None
        if idx < 0:
            raise ManifestError(f"{path}: line {lineno}: negative frame index {idx}")
        if not math.isfinite(ts) or ts < 0:
            raise ManifestError(f"{path}: line {lineno}: bad timestamp {parts[1]}")
        if idx in seen:
            raise ManifestError(
                f"{path}: line {lineno}: duplicate frame index {idx} (first at line {seen[idx]})"
            )
        seen[idx] = lineno
        entries.append(ManifestEntry(idx, ts, parts[2]))

    entries.sort(key=lambda e: e.frame_index)
    for prev, cur in zip(entries, entries[1:]):
        if cur.timestamp_s <= prev.timestamp_s:
            raise ManifestError(
                f"{path}: timestamp {cur.timestamp_s} at frame {cur.frame_index} does not "
                f"increase past frame {prev.frame_index}"
            )
    fps = _derive_fps([e.timestamp_s for e in entries])
    return FrameManifest(entries=tuple(entries), base_dir=path.parent, effective_fps=fps)


def read_frame(manifest: FrameManifest, frame_index: int) -> Frame:
    """Decode one frame by index. Pure: repeated reads are bit-identical."""
    entry = manifest.entry(frame_index)
    pixels = read_pgm(manifest.base_dir / entry.path)
    return Frame(frame_index=entry.frame_index, timestamp_s=entry.timestamp_s, luminance=pixels)


def filter_corrupted(
    manifest: FrameManifest,
    mean_threshold: float = 5.0,
    sample_period_s: float = 30.0,
) -> FrameManifest:
    """Drop every sample window whose first frame has mean luminance below threshold.

    Windows are [k*P, (k+1)*P) anchored at t=0, so a second application sees
    the same grid and removes nothing further (idempotence). The input
    manifest is left untouched.
    """
    if not 0 <= mean_threshold <= 255:
        raise ManifestError(f"mean_threshold must be in [0,255], got {mean_threshold}")
    if sample_period_s <= 0:
        raise ManifestError(f"sample_period_s must be > 0, got {sample_period_s}")

    windows: dict[int, list[ManifestEntry]] = {}
    for entry in manifest.entries:
        windows.setdefault(int(entry.timestamp_s // sample_period_s), []).append(entry)

    kept: list[ManifestEntry] = []
    for key in sorted(windows):
        group = windows[key]
        sampled = read_frame(manifest, group[0].frame_index)
        if float(sampled.luminance.mean()) < mean_threshold:
            continue
        kept.extend(group)
    return FrameManifest(
        entries=tuple(kept), base_dir=manifest.base_dir, effective_fps=manifest.effective_fps
    )
