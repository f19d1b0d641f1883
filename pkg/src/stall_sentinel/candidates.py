"""Candidate anomaly regions.

Surviving detection centroids are clustered (seeded k-means, cluster count
from the elbow rule), gated by the road mask, and turned into regions of
interest carrying the earliest snapshot each cluster was seen in.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .detections import Box, DetectionRecord
from .errors import CandidateError, MaskError
from .pgm import read_pgm
from .rng import DOMAIN_KMEANS, keyed_rng


@dataclasses.dataclass(frozen=True)
class SegmentationMask:
    road: np.ndarray  # (height, width) bool, True = road/vehicle region

    @property
    def width(self) -> int:
        return self.road.shape[1]

    @property
    def height(self) -> int:
        return self.road.shape[0]


def load_mask(path: str | Path, expected_size: tuple[int, int] | None = None) -> SegmentationMask:
    """Load a 0/255 PGM road mask; expected_size is (width, height) of the
    video frames when known."""
    pixels = read_pgm(path)
    bad = (pixels != 0) & (pixels != 255)
    if bad.any():
        raise MaskError(f"{path}: mask contains values other than 0/255")
    if expected_size is not None:
        w, h = expected_size
        if pixels.shape != (h, w):
            raise MaskError(
                f"{path}: mask is {pixels.shape[1]}x{pixels.shape[0]}, frames are {w}x{h}"
            )
    return SegmentationMask(road=pixels == 255)


def kmeans(
    points: np.ndarray,
    k: int,
    max_iters: int = 100,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm from seeded k-means++ starts.

    Returns (centroids (k,2), assignment (n,), wcss). Deterministic for a
    fixed seed; the per-iteration wcss sequence is checked nonincreasing.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if k < 1 or k > n:
        raise CandidateError(f"k must be in [1, {n}], got {k}")
    if max_iters < 1:
        raise CandidateError(f"max_iters must be >= 1, got {max_iters}")

    rng = keyed_rng(seed, DOMAIN_KMEANS)
    centers = np.empty((k, 2), dtype=np.float64)
    chosen = [int(rng.integers(n))]
    centers[0] = pts[chosen[0]]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # Every point coincides with a center; any unchosen index works.
            taken = set(chosen)
            idx = next(i for i in range(n) if i not in taken)
        else:
            r = rng.random() * total
            idx = min(int(np.searchsorted(np.cumsum(d2), r, side="right")), n - 1)
        chosen.append(idx)
        centers[c] = pts[idx]
        d2 = np.minimum(d2, ((pts - centers[c]) ** 2).sum(axis=1))

    assign = np.full(n, -1, dtype=np.int64)
    wcss = float("inf")
    for _ in range(max_iters):
        dist2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist2.argmin(axis=1)
        new_wcss = float(dist2[np.arange(n), new_assign].sum())
        if new_wcss > wcss * (1 + 1e-12) + 1e-9:
            raise CandidateError("k-means objective increased; numerical trouble")
        wcss = new_wcss
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = pts[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            # An empty cluster keeps its previous centroid.
    return centers, assign, wcss


def select_k_elbow(
    points: np.ndarray,
    k_max: int,
    seed: int = 0,
    min_scale_px: float = 0.0,
) -> int:
    """Pick the cluster count at the elbow of the wcss curve.

    The elbow is the k whose (k, wcss) point lies farthest from the chord
    joining the curve's endpoints; ties go to the smallest k. With one or
    two points there is nothing to cluster (returns 1). min_scale_px, when
    positive, short-circuits to 1 if the whole set's rms scatter is at or
    below it, so measurement jitter around a single object is not split.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise CandidateError("cannot select k for an empty point set")
    if k_max < 1:
        raise CandidateError(f"k_max must be >= 1, got {k_max}")
    if n <= 2:
        return 1
    k_hi = min(k_max, n)
    wcss = [kmeans(pts, k, seed=seed)[2] for k in range(1, k_hi + 1)]
    if min_scale_px > 0 and np.sqrt(wcss[0] / n) <= min_scale_px:
        return 1
    if k_hi == 1:
        return 1

    x1, y1 = 1.0, wcss[0]
    x2, y2 = float(k_hi), wcss[-1]
    chord = np.hypot(x2 - x1, y2 - y1)
    best_k, best_d = 1, -1.0
    for i, w in enumerate(wcss):
        k = i + 1
        d = abs((x2 - x1) * (y1 - w) - (x1 - k) * (y2 - y1)) / chord
        if d > best_d:
            best_d = d
            best_k = k
    return best_k


@dataclasses.dataclass(frozen=True)
class CandidateRegion:
    centroid: tuple[float, float]
    roi: Box
    first_seen_snapshot: int
    members: tuple[DetectionRecord, ...]


def build_candidates(
    records: list[DetectionRecord],
    mask: SegmentationMask,
    k_max: int = 8,
    seed: int = 0,
    roi_margin: float = 8.0,
    min_scale_px: float = 0.0,
) -> list[CandidateRegion]:
    """Cluster filtered detections into candidate regions.

    Per cluster: roi = union of member boxes grown by roi_margin and clamped
    to the frame; clusters whose centroid falls on a non-road mask pixel are
    dropped. Output is ordered by (first seen snapshot, centroid).
    """
    if roi_margin < 0:
        raise CandidateError(f"roi_margin must be >= 0, got {roi_margin}")
    if not records:
        return []
    points = np.array([r.centroid for r in records], dtype=np.float64)
    k = select_k_elbow(points, k_max, seed=seed, min_scale_px=min_scale_px)
    centers, assign, _ = kmeans(points, k, seed=seed)

    regions: list[CandidateRegion] = []
    for c in range(k):
        members = [rec for rec, a in zip(records, assign) if a == c]
        if not members:
            continue
        cx, cy = float(centers[c, 0]), float(centers[c, 1])
        px = min(max(int(cx), 0), mask.width - 1)
        py = min(max(int(cy), 0), mask.height - 1)
        if not mask.road[py, px]:
            continue
        x0 = max(0.0, min(m.box.x for m in members) - roi_margin)
        y0 = max(0.0, min(m.box.y for m in members) - roi_margin)
        x1 = min(float(mask.width), max(m.box.x + m.box.w for m in members) + roi_margin)
        y1 = min(float(mask.height), max(m.box.y + m.box.h for m in members) + roi_margin)
        regions.append(
            CandidateRegion(
                centroid=(cx, cy),
                roi=Box(x0, y0, x1 - x0, y1 - y0),
                first_seen_snapshot=min(m.snapshot_index for m in members),
                members=tuple(members),
            )
        )
    regions.sort(key=lambda r: (r.first_seen_snapshot, r.centroid))
    return regions
