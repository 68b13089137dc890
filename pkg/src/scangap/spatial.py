"""Exact nearest-neighbour queries over a single cloud.

A :class:`scipy.spatial.cKDTree` proposes candidates; every candidate distance
is then recomputed with one fixed formula (``dx*dx + dy*dy + dz*dz``, in that
order) and the winner is the smallest ``(squared distance, point id)`` pair.
Rows where the tree's shortlist could hide a tie or a near-tie are re-resolved
with a ball query, so results are identical to a brute-force linear scan using
the same formula, including lowest-id tie breaking.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloudError, PreconditionError
from .pointcloud import PointCloud

_SHORTLIST = 4
_REL_SLACK = 1e-9


def squared_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Canonical squared Euclidean distance, broadcasting ``points`` against ``q``."""
    dx = points[..., 0] - q[..., 0]
    dy = points[..., 1] - q[..., 1]
    dz = points[..., 2] - q[..., 2]
    return dx * dx + dy * dy + dz * dz


class SpatialIndex:
    """Immutable exact nearest-neighbour index over one cloud's points."""

    def __init__(self, points: np.ndarray):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.shape[0] == 0:
            raise EmptyCloudError("cannot index an empty cloud")
        self._points = pts
        self._tree = cKDTree(pts, leafsize=16, balanced_tree=False, compact_nodes=False)

    def __len__(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self._points

    def query(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest point id and squared distance for every row of ``queries``."""
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        if q.shape[0] == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        k = min(_SHORTLIST, len(self))
        _, cand = self._tree.query(q, k=k)
        cand = cand.reshape(q.shape[0], k).astype(np.int64)
        d2 = squared_distances(self._points[cand], q[:, None, :])
        # lexicographic (d2, id) minimum per row
        best = np.empty(q.shape[0], dtype=np.int64)
        best_d2 = np.empty(q.shape[0])
        col = np.argmin(d2, axis=1)
        rows = np.arange(q.shape[0])
        best_d2[:] = d2[rows, col]
        tied = d2 == best_d2[:, None]
        masked = np.where(tied, cand, np.iinfo(np.int64).max)
        best[:] = masked.min(axis=1)

        if k < len(self):
            # shortlist may be truncated inside a tie or near-tie: re-resolve exactly
            worst = d2.max(axis=1)
            risky = np.flatnonzero(worst <= best_d2 * (1.0 + _REL_SLACK) + 1e-300)
            for r in risky:
                best[r], best_d2[r] = self._resolve_ball(q[r], best_d2[r])
        return best, best_d2

    def _resolve_ball(self, q: np.ndarray, d2: float) -> tuple[int, float]:
        radius = np.sqrt(d2) * (1.0 + _REL_SLACK) + 1e-12
        ids = np.asarray(self._tree.query_ball_point(q, radius), dtype=np.int64)
        cd2 = squared_distances(self._points[ids], q)
        m = cd2.min()
        return int(ids[cd2 == m].min()), float(m)

    def nearest(self, q) -> tuple[int, float]:
        ids, d2 = self.query(np.asarray(q, dtype=np.float64).reshape(1, 3))
        return int(ids[0]), float(np.sqrt(d2[0]))

    def nearest_within(self, q, r: float) -> Optional[tuple[int, float]]:
        if not r > 0:
            raise PreconditionError(f"radius must be positive, got {r!r}")
        pid, dist = self.nearest(q)
        return (pid, dist) if dist <= r else None


def build_index(cloud: PointCloud) -> SpatialIndex:
    if cloud.is_empty:
        raise EmptyCloudError("cannot index an empty cloud")
    return SpatialIndex(cloud.points)


def nearest(index: SpatialIndex, q) -> tuple[int, float]:
    return index.nearest(q)


def nearest_within(index: SpatialIndex, q, r: float) -> Optional[tuple[int, float]]:
    return index.nearest_within(q, r)
