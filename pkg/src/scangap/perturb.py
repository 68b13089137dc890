"""Seeded modifiers that turn one scan into a controlled test case.

Noise, random and clustered outliers, random and voxel density reduction,
and affine distortion. Every stochastic modifier draws from the pinned stream
in :mod:`scangap.rng`, in a fixed documented order, so the same seed gives the
same cloud on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from . import rng
from .errors import EmptyCloudError, PreconditionError
from .pointcloud import PointCloud, bounds, concat
from .voxel import downsample_voxel as _voxel_centroids

PERTURBATION_KINDS = (
    "identity",
    "noise",
    "random_outliers",
    "clustered_outliers",
    "downsample_random",
    "downsample_voxel",
    "transform",
)


@dataclass(frozen=True)
class Affine:
    """``p -> linear @ p + translation``."""

    linear: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        lin = np.array(self.linear, dtype=np.float64).reshape(3, 3)
        tr = np.array(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.det(lin)) < 1e-12:
            raise PreconditionError("affine linear part is singular")
        lin.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "translation", tr)

    def __matmul__(self, other: "Affine") -> "Affine":
        """Composition: ``(self @ other)(p) == self(other(p))``."""
        return Affine(self.linear @ other.linear, self.linear @ other.translation + self.translation)

    def to_dict(self) -> dict:
        return {"linear": self.linear.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Affine":
        return cls(np.asarray(d.get("linear", np.eye(3))), np.asarray(d.get("translation", np.zeros(3))))

    @classmethod
    def identity(cls) -> "Affine":
        return cls()

    @classmethod
    def rotation(cls, rx: float = 0.0, ry: float = 0.0, rz: float = 0.0) -> "Affine":
        """Euler rotation in radians, applied about x, then y, then z."""
        cx, sx = np.cos(rx), np.sin(rx)
        cy, sy = np.cos(ry), np.sin(ry)
        cz, sz = np.cos(rz), np.sin(rz)
        mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return cls(mz @ my @ mx)

    @classmethod
    def scale(cls, sx: float, sy: Optional[float] = None, sz: Optional[float] = None) -> "Affine":
        sy = sx if sy is None else sy
        sz = sx if sz is None else sz
        return cls(np.diag([sx, sy, sz]))

    @classmethod
    def shear(cls, xy=0.0, xz=0.0, yx=0.0, yz=0.0, zx=0.0, zy=0.0) -> "Affine":
        """Unit shear; ``xy`` adds ``xy * y`` to x, and so on."""
        return cls(np.array([[1.0, xy, xz], [yx, 1.0, yz], [zx, zy, 1.0]]))

    @classmethod
    def translate(cls, tx: float = 0.0, ty: float = 0.0, tz: float = 0.0) -> "Affine":
        return cls(np.eye(3), np.array([tx, ty, tz]))


def add_noise(cloud: PointCloud, std: float, seed: int) -> PointCloud:
    """Independent Gaussian(0, std) offsets on every coordinate; intensity untouched."""
    if std < 0:
        raise PreconditionError(f"noise std must be >= 0, got {std}")
    if std == 0 or cloud.is_empty:
        return cloud
    offsets = rng.normal(rng.stream(seed), cloud.points.shape) * std
    return cloud.with_points(cloud.points + offsets, cloud.intensity)


def add_random_outliers(cloud: PointCloud, count: int, seed: int) -> PointCloud:
    """Append ``count`` points drawn uniformly inside the cloud's bounding box (intensity 0)."""
    if cloud.is_empty:
        raise EmptyCloudError("cannot add outliers to an empty cloud")
    if count < 0:
        raise PreconditionError(f"outlier count must be >= 0, got {count}")
    if count == 0:
        return cloud
    box = bounds(cloud)
    u = rng.uniform(rng.stream(seed), (count, 3))
    pts = box.min + u * box.extent
    # guard against rounding past the upper face
    pts = np.minimum(pts, box.max)
    return concat(cloud, pts)


def _uniform_ball(gen: np.random.Generator, n: int) -> np.ndarray:
    """``n`` points uniform in the unit ball: Gaussian direction, radius u^(1/3)."""
    direction = rng.normal(gen, (n, 3))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radius = np.cbrt(rng.uniform(gen, (n, 1)))
    return direction / norms * radius


def add_clustered_outliers(
    cloud: PointCloud,
    n_clusters: int,
    max_points_per_cluster: int,
    max_radius: float,
    max_center_dist: float,
    seed: int,
) -> PointCloud:
    """Append spherical clusters of points scattered around the cloud centroid.

    Draw order per cluster: center (ball of ``max_center_dist`` around the
    centroid), size (uniform integer in [1, max_points_per_cluster]), radius
    (uniform in (0, max_radius]), then the cluster's points.
    """
    if cloud.is_empty:
        raise EmptyCloudError("cannot add outliers to an empty cloud")
    if n_clusters < 0:
        raise PreconditionError(f"cluster count must be >= 0, got {n_clusters}")
    if n_clusters == 0:
        return cloud
    if max_points_per_cluster < 1 or not max_radius > 0 or not max_center_dist > 0:
        raise PreconditionError("cluster size, radius and center distance must be positive")
    gen = rng.stream(seed)
    centroid = cloud.centroid()
    chunks = []
    for _ in range(n_clusters):
        center = centroid + _uniform_ball(gen, 1)[0] * max_center_dist
        size = int(rng.uniform(gen, 1)[0] * max_points_per_cluster) + 1
        radius = (1.0 - rng.uniform(gen, 1)[0]) * max_radius
        chunks.append(center + _uniform_ball(gen, size) * radius)
    return concat(cloud, np.vstack(chunks))


def downsample_random(cloud: PointCloud, fraction: float, seed: int) -> PointCloud:
    """Keep ``round(fraction * n)`` points chosen uniformly without replacement, in original order."""
    if not 0 < fraction <= 1:
        raise PreconditionError(f"fraction must be in (0, 1], got {fraction}")
    n = len(cloud)
    m = int(round(fraction * n))
    if m == 0:
        raise PreconditionError(f"downsampling {n} points by {fraction} leaves no points")
    if m == n:
        return cloud
    keep = rng.sample_indices(rng.stream(seed), n, m)
    inten = cloud.intensity[keep] if cloud.has_intensity else None
    return cloud.with_points(cloud.points[keep], inten)


def downsample_voxel(cloud: PointCloud, cell: float) -> PointCloud:
    """One centroid per occupied voxel of an origin-anchored grid."""
    return _voxel_centroids(cloud, cell)


def apply_transform(cloud: PointCloud, t: Affine) -> PointCloud:
    return cloud.with_points(cloud.points @ t.linear.T + t.translation, cloud.intensity)


# -- serialisable specs --------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """A modifier kind, its parameters and a 64-bit seed.

    ``params`` holds the kind's keyword arguments; for ``transform`` it holds
    ``linear`` and ``translation`` (or an ``affine`` mapping).
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise PreconditionError(
                f"unknown perturbation {self.kind!r}; expected one of {', '.join(PERTURBATION_KINDS)}"
            )
        _validate(self.kind, self.params)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **_jsonable(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PerturbationSpec":
        d = dict(d)
        kind = d.pop("kind")
        seed = int(d.pop("seed", 0))
        params = d.pop("params", {})
        params.update(d)
        return cls(kind, params, seed)

    def with_seed(self, seed: int) -> "PerturbationSpec":
        return PerturbationSpec(self.kind, dict(self.params), seed)

    def apply(self, cloud: PointCloud) -> PointCloud:
        p = self.params
        if self.kind == "identity":
            return cloud
        if self.kind == "noise":
            return add_noise(cloud, float(p["std"]), self.seed)
        if self.kind == "random_outliers":
            return add_random_outliers(cloud, int(p["count"]), self.seed)
        if self.kind == "clustered_outliers":
            return add_clustered_outliers(
                cloud,
                int(p["n_clusters"]),
                int(p.get("max_points_per_cluster", 1000)),
                float(p.get("max_radius", 1.0)),
                float(p.get("max_center_dist", 20.0)),
                self.seed,
            )
        if self.kind == "downsample_random":
            return downsample_random(cloud, float(p["fraction"]), self.seed)
        if self.kind == "downsample_voxel":
            return downsample_voxel(cloud, float(p["cell"]))
        return apply_transform(cloud, affine_from_params(p))


_REQUIRED = {
    "noise": ("std",),
    "random_outliers": ("count",),
    "clustered_outliers": ("n_clusters",),
    "downsample_random": ("fraction",),
    "downsample_voxel": ("cell",),
}


def _validate(kind: str, params: dict) -> None:
    missing = [k for k in _REQUIRED.get(kind, ()) if k not in params]
    if missing:
        raise PreconditionError(f"{kind} needs parameter(s): {', '.join(missing)}")
    if kind == "noise" and float(params["std"]) < 0:
        raise PreconditionError("noise std must be >= 0")
    if kind == "random_outliers" and int(params["count"]) < 0:
        raise PreconditionError("outlier count must be >= 0")
    if kind == "downsample_random" and not 0 < float(params["fraction"]) <= 1:
        raise PreconditionError("fraction must be in (0, 1]")
    if kind == "downsample_voxel" and not float(params["cell"]) > 0:
        raise PreconditionError("voxel cell must be positive")
    if kind == "transform":
        affine_from_params(params)


def affine_from_params(p: dict) -> Affine:
    """Build an Affine from either explicit matrices or helper parameters.

    Helper keys, composed as translate ∘ rotate ∘ shear ∘ scale:
    ``rotation`` (x, y, z radians), ``scale`` (scalar or 3-vector),
    ``shear`` (mapping of xy/xz/yx/yz/zx/zy), ``translation`` (3-vector).
    """
    if "affine" in p:
        return Affine.from_dict(p["affine"])
    if "linear" in p:
        return Affine(np.asarray(p["linear"]), np.asarray(p.get("translation", np.zeros(3))))
    t = Affine.identity()
    if "scale" in p:
        s = np.atleast_1d(np.asarray(p["scale"], dtype=np.float64))
        t = Affine.scale(*s.tolist()) @ t if len(s) == 3 else Affine.scale(float(s[0])) @ t
    if "shear" in p:
        t = Affine.shear(**p["shear"]) @ t
    if "rotation" in p:
        t = Affine.rotation(*p["rotation"]) @ t
    if "translation" in p:
        t = Affine.translate(*p["translation"]) @ t
    return t


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, Affine):
            v = v.to_dict()
        out[k] = v
    return out


def scaled(kind: str, level: float, base: Optional[dict] = None) -> PerturbationSpec:
    """The spec a sweep uses at ``level``: the level becomes the kind's intensity parameter.

    noise -> std, random_outliers -> count, clustered_outliers -> n_clusters,
    downsample_random -> fraction, downsample_voxel -> cell, transform ->
    the scalar named by ``base['axis']`` (translation_x, rotation_z, scale...).
    """
    params = dict(base or {})
    if kind == "noise":
        params["std"] = float(level)
    elif kind == "random_outliers":
        params["count"] = int(round(level))
    elif kind == "clustered_outliers":
        params["n_clusters"] = int(round(level))
    elif kind == "downsample_random":
        params["fraction"] = float(level)
    elif kind == "downsample_voxel":
        params["cell"] = float(level)
    elif kind == "transform":
        axis = params.pop("axis", "translation_x")
        params.update(_transform_axis(axis, float(level)))
    elif kind != "identity":
        raise PreconditionError(f"cannot sweep perturbation kind {kind!r}")
    return PerturbationSpec(kind, params)


def _transform_axis(axis: str, level: float) -> dict:
    if axis.startswith("translation_"):
        vec = [0.0, 0.0, 0.0]
        vec["xyz".index(axis[-1])] = level
        return {"translation": vec}
    if axis.startswith("rotation_"):
        vec = [0.0, 0.0, 0.0]
        vec["xyz".index(axis[-1])] = level
        return {"rotation": vec}
    if axis == "scale":
        return {"scale": level}
    if axis.startswith("shear_"):
        return {"shear": {axis[len("shear_"):]: level}}
    raise PreconditionError(f"unknown transform axis {axis!r}")


def apply_all(cloud: PointCloud, specs: Sequence[PerturbationSpec]) -> PointCloud:
    for spec in specs:
        cloud = spec.apply(cloud)
    return cloud
