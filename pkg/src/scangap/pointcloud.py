"""Point-cloud data model: clouds, sensor poses and bounding boxes."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyCloudError, ValidationError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Odometry:
    """Sensor pose at capture time: translation in meters plus unit quaternion (x, y, z, w)."""

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        if len(self.translation) != 3 or len(self.rotation) != 4:
            raise ValidationError("odometry needs a 3-vector translation and a 4-vector quaternion")
        norm = float(np.linalg.norm(self.rotation))
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"quaternion norm must be 1 within 1e-9, got {norm!r}")
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))
        object.__setattr__(self, "rotation", tuple(float(v) for v in self.rotation))

    def to_dict(self) -> dict:
        return {"translation": list(self.translation), "rotation": list(self.rotation)}

    @classmethod
    def from_dict(cls, d: dict) -> "Odometry":
        return cls(tuple(d["translation"]), tuple(d["rotation"]))


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.min) & (pts <= self.max), axis=1)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ordered set of 3D points (meters, float64) with optional per-point intensity.

    Instances are immutable: the arrays are copied on construction and marked
    read-only, so a cloud can be shared freely between threads.
    """

    points: np.ndarray
    intensity: Optional[np.ndarray] = None
    frame_id: Optional[str] = None
    pose: Optional[Odometry] = None
    _digest: Optional[str] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must have shape (n, 3), got {pts.shape}")
        finite = np.isfinite(pts).all(axis=1)
        if not finite.all():
            row = int(np.flatnonzero(~finite)[0])
            raise ValidationError(f"non-finite coordinate in row {row}")
        object.__setattr__(self, "points", _frozen(pts))
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=np.float64, copy=True).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValidationError(
                    f"intensity length {inten.shape[0]} does not match point count {pts.shape[0]}"
                )
            object.__setattr__(self, "intensity", _frozen(inten))

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        tag = ", intensity" if self.has_intensity else ""
        return f"PointCloud(n={len(self)}{tag}, frame_id={self.frame_id!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        if not np.array_equal(self.points, other.points):
            return False
        if self.has_intensity != other.has_intensity:
            return False
        return not self.has_intensity or np.array_equal(self.intensity, other.intensity)

    __hash__ = None  # type: ignore[assignment]

    @property
    def has_intensity(self) -> bool:
        return self.intensity is not None

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def digest(self) -> str:
        """Content hash of the coordinates (hex), cached."""
        if self._digest is None:
            h = hashlib.blake2b(self.points.tobytes(), digest_size=16).hexdigest()
            object.__setattr__(self, "_digest", h)
        return self._digest

    def with_points(self, points: np.ndarray, intensity: Optional[np.ndarray] = None) -> "PointCloud":
        return PointCloud(points, intensity, frame_id=self.frame_id, pose=self.pose)

    def centroid(self) -> np.ndarray:
        if self.is_empty:
            raise EmptyCloudError("centroid of an empty cloud")
        return self.points.mean(axis=0)


def from_xyz(xyz: Sequence, intensity: Optional[Sequence] = None, **kw) -> PointCloud:
    return PointCloud(np.asarray(xyz, dtype=np.float64), intensity, **kw)


def bounds(cloud: PointCloud) -> Aabb:
    """Tight axis-aligned bounding box of a non-empty cloud."""
    if cloud.is_empty:
        raise EmptyCloudError("bounds of an empty cloud")
    return Aabb(_frozen(cloud.points.min(axis=0)), _frozen(cloud.points.max(axis=0)))


def concat(first: PointCloud, points: np.ndarray, intensity_fill: float = 0.0) -> PointCloud:
    """Append raw points to a cloud; new points get ``intensity_fill`` if the cloud carries intensity."""
    pts = np.vstack([first.points, np.asarray(points, dtype=np.float64).reshape(-1, 3)])
    inten = None
    if first.has_intensity:
        extra = np.full(pts.shape[0] - len(first), intensity_fill, dtype=np.float64)
        inten = np.concatenate([first.intensity, extra])
    return first.with_points(pts, inten)
