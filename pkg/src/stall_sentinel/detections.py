"""Ingested object detections and their geometric post-processing.

Detections arrive as text records, one per background snapshot they were
found on. Post-processing removes duplicate boxes (NMS), long-lived static
false positives (dense centroid piles across many snapshots), and moving
vehicles (centroids without close repeat observations).
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .errors import DetectionError

CLASS_IDS = ("car", "truck")


@dataclasses.dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise DetectionError(f"box sides must be positive, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclasses.dataclass(frozen=True)
class DetectionRecord:
    snapshot_index: int
    class_id: str
    confidence: float
    box: Box

    def __post_init__(self) -> None:
        if self.snapshot_index < 0:
            raise DetectionError(f"snapshot_index must be >= 0, got {self.snapshot_index}")
        if self.class_id not in CLASS_IDS:
            raise DetectionError(f"class_id must be one of {CLASS_IDS}, got {self.class_id!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise DetectionError(f"confidence must be in [0,1], got {self.confidence}")

    @property
    def centroid(self) -> tuple[float, float]:
        return self.box.centroid


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0,1]."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def iou_distance(a: Box, b: Box) -> float:
    return 1.0 - iou(a, b)


def load_detections(path: str | Path) -> list[DetectionRecord]:
    """Parse a detection file; records come back sorted by
    (snapshot_index, confidence descending). Malformed lines raise
    DetectionError with their line number."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DetectionError(f"{path}: unreadable: {exc}") from exc

    records: list[DetectionRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 7:
            raise DetectionError(f"{path}: line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            snap = int(parts[0])
            conf = float(parts[2])
            x, y, w, h = (float(p) for p in parts[3:7])
            records.append(
                DetectionRecord(
                    snapshot_index=snap,
                    class_id=parts[1],
                    confidence=conf,
                    box=Box(x, y, w, h),
                )
            )
        except (ValueError, DetectionError) as exc:
            raise DetectionError(f"{path}: line {lineno}: {exc}") from None
    records.sort(key=lambda r: (r.snapshot_index, -r.confidence))
    return records


def _format_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_detections(path: str | Path, records: list[DetectionRecord]) -> None:
    lines = [
        f"{r.snapshot_index},{r.class_id},{r.confidence:.4f},"
        f"{_format_num(r.box.x)},{_format_num(r.box.y)},"
        f"{_format_num(r.box.w)},{_format_num(r.box.h)}"
        for r in records
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def nms(records: list[DetectionRecord], iou_thresh: float = 0.5) -> list[DetectionRecord]:
    """Greedy per-snapshot non-maximum suppression.

    Within a snapshot, records are visited by confidence descending (ties:
    box (x, y, w, h) lexicographic, then input order) and kept unless they
    overlap an already-kept record with iou > iou_thresh.
    """
    if not 0.0 < iou_thresh < 1.0:
        raise DetectionError(f"iou_thresh must be in (0,1), got {iou_thresh}")
    groups: dict[int, list[DetectionRecord]] = {}
    for rec in records:
        groups.setdefault(rec.snapshot_index, []).append(rec)

    survivors: list[DetectionRecord] = []
    for snap in sorted(groups):
        pool = sorted(
            groups[snap], key=lambda r: (-r.confidence, r.box.x, r.box.y, r.box.w, r.box.h)
        )
        kept: list[DetectionRecord] = []
        for rec in pool:
            if all(iou(rec.box, other.box) <= iou_thresh for other in kept):
                kept.append(rec)
        survivors.extend(kept)
    return survivors


@dataclasses.dataclass(frozen=True)
class CentroidCloud:
    """All detection centroids across the video, queried by the kNN filters."""

    coords: np.ndarray  # (n, 2) float64
    snapshots: np.ndarray  # (n,) int64

    def __len__(self) -> int:
        return len(self.coords)


def build_cloud(records: list[DetectionRecord]) -> CentroidCloud:
    coords = np.array([r.centroid for r in records], dtype=np.float64).reshape(-1, 2)
    snaps = np.array([r.snapshot_index for r in records], dtype=np.int64)
    return CentroidCloud(coords=coords, snapshots=snaps)


def knn_distance(cloud: CentroidCloud, query: tuple[float, float], k: int) -> float | None:
    """Euclidean distance from query to its k-th nearest cloud point.

    One cloud point exactly equal to the query is excluded (the record
    itself); further coincident points count as zero-distance neighbors.
    Returns None when fewer than k neighbors remain, signalling the caller
    to apply its insufficient-neighbors rule.
    """
    if k < 1:
        raise DetectionError(f"k must be >= 1, got {k}")
    if len(cloud) == 0:
        return None
    qx, qy = float(query[0]), float(query[1])
    dx = cloud.coords[:, 0] - qx
    dy = cloud.coords[:, 1] - qy
    d2 = dx * dx + dy * dy
    self_rows = np.flatnonzero((cloud.coords[:, 0] == qx) & (cloud.coords[:, 1] == qy))
    if self_rows.size:
        d2 = np.delete(d2, self_rows[0])
    if d2.size < k:
        return None
    return float(np.sqrt(np.partition(d2, k - 1)[k - 1]))


def filter_misclassified(
    records: list[DetectionRecord],
    neighbor_k: int = 20,
    dist_px: float = 5.0,
    cloud: CentroidCloud | None = None,
) -> list[DetectionRecord]:
    """Drop records whose k-th neighbor sits within dist_px: a pile of many
    near-coincident centroids is a static object the detector keeps
    misreading, not a vehicle. Records with fewer than k neighbors are kept.

    Pass the pre-filter cloud explicitly when chaining filters so both see
    the same neighborhood.
    """
    if neighbor_k < 1 or dist_px <= 0:
        raise DetectionError("filter_misclassified needs neighbor_k >= 1 and dist_px > 0")
    if cloud is None:
        cloud = build_cloud(records)
    out = []
    for rec in records:
        d = knn_distance(cloud, rec.centroid, neighbor_k)
        if d is None or d > dist_px:
            out.append(rec)
    return out


def filter_slow(
    records: list[DetectionRecord],
    neighbor_k: int = 2,
    dist_px: float = 20.0,
    cloud: CentroidCloud | None = None,
) -> list[DetectionRecord]:
    """Drop records whose k-th neighbor is dist_px or farther: a stalled
    vehicle repeats its centroid across snapshots, so spread-out centroids
    are movers. Records with fewer than k neighbors are movers by the same
    argument and are dropped too."""
    if neighbor_k < 1 or dist_px <= 0:
        raise DetectionError("filter_slow needs neighbor_k >= 1 and dist_px > 0")
    if cloud is None:
        cloud = build_cloud(records)
    out = []
    for rec in records:
        d = knn_distance(cloud, rec.centroid, neighbor_k)
        if d is not None and d < dist_px:
            out.append(rec)
    return out
