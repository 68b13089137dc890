"""Origin-anchored voxel grids."""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError
from .pointcloud import PointCloud


def voxel_keys(points: np.ndarray, size: float) -> np.ndarray:
    """Integer voxel coordinates ``floor(p / size)`` per axis, shape (n, 3)."""
    if not size > 0:
        raise PreconditionError(f"voxel size must be positive, got {size!r}")
    return np.floor(np.asarray(points) / size).astype(np.int64)


def occupied(points: np.ndarray, size: float) -> np.ndarray:
    """Sorted unique occupied voxel keys, shape (k, 3)."""
    return np.unique(voxel_keys(points, size), axis=0)


def downsample_voxel(cloud: PointCloud, cell: float) -> PointCloud:
    """Replace the points of every occupied voxel by their centroid (intensity averaged).

    Output order follows the lexicographic order of voxel keys.
    """
    if not cell > 0:
        raise PreconditionError(f"voxel cell must be positive, got {cell!r}")
    if cloud.is_empty:
        return cloud
    keys, inverse, counts = np.unique(
        voxel_keys(cloud.points, cell), axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(keys), 3))
    np.add.at(sums, inverse, cloud.points)
    pts = sums / counts[:, None]
    inten = None
    if cloud.has_intensity:
        inten = np.bincount(inverse, weights=cloud.intensity, minlength=len(keys)) / counts
    return cloud.with_points(pts, inten)
