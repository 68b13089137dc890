"""Geometric similarity measures between two LiDAR scans.

All functions take two :class:`~scangap.pointcloud.PointCloud` objects and
return a :class:`MetricResult`. Distance-like metrics are 0 for identical
clouds, similarity-like metrics are 1. Every floating-point reduction goes
through :func:`math.fsum`, so results do not depend on summation order.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist

from . import rng
from .errors import (
    DegenerateCloudError,
    EmptyCloudError,
    PreconditionError,
    RegistrationDiverged,
)
from .pointcloud import PointCloud
from .spatial import SpatialIndex, squared_distances
from .voxel import downsample_voxel, occupied

KINDS = ("chamfer", "dcd", "emd", "histogram", "icp", "voxel_iou", "bev")
DISTANCE, SIMILARITY = "distance", "similarity"
EMD_DEFAULT_CAP = 4096


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    convergence_tol: float = 1e-6
    max_correspondence_dist: float = 2.0

    def __post_init__(self):
        if self.max_iterations < 1 or not self.convergence_tol > 0 or not self.max_correspondence_dist > 0:
            raise PreconditionError(f"ICP parameters must be positive: {self}")


@dataclass(frozen=True)
class RandomSampling:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError(f"random sampling needs n >= 2, got {self.n}")


@dataclass(frozen=True)
class VoxelSampling:
    cell: float

    def __post_init__(self):
        if not self.cell > 0:
            raise PreconditionError(f"voxel sampling cell must be positive, got {self.cell}")


Sampling = Union[RandomSampling, VoxelSampling]


@dataclass(frozen=True)
class MetricSpec:
    """A metric kind plus the parameters that kind reads; unused fields are ignored."""

    kind: str
    alpha: float = 1.0
    sampling: Optional[Sampling] = None
    bins: int = 256
    minkowski_order: float = 1.0
    voxel_size: float = 0.5
    cell_size: float = 0.5
    icp: IcpParams = field(default_factory=IcpParams)
    pre_downsample: Optional[float] = None
    seed: int = 0
    emd_cap: int = EMD_DEFAULT_CAP

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown metric {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.alpha > 0:
            raise PreconditionError(f"alpha must be positive, got {self.alpha}")
        if self.bins < 2:
            raise PreconditionError(f"bins must be >= 2, got {self.bins}")
        for name in ("minkowski_order", "voxel_size", "cell_size"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"{name} must be positive, got {getattr(self, name)}")
        if self.pre_downsample is not None and not self.pre_downsample > 0:
            raise PreconditionError("pre_downsample cell must be positive")
        if self.kind == "histogram" and self.sampling is None:
            object.__setattr__(self, "sampling", VoxelSampling(1.0))

    @property
    def orientation(self) -> str:
        return SIMILARITY if self.kind == "voxel_iou" else DISTANCE

    @property
    def label(self) -> str:
        """Short human-readable name, unique per parameterisation used in reports."""
        if self.kind == "dcd":
            base = f"dcd(alpha={self.alpha:g})"
        elif self.kind == "histogram":
            s = self.sampling
            base = f"histogram(random n={s.n})" if isinstance(s, RandomSampling) else f"histogram(voxel {s.cell:g})"
        elif self.kind == "voxel_iou":
            base = f"voxel_iou({self.voxel_size:g})"
        elif self.kind == "bev":
            base = f"bev({self.cell_size:g})"
        else:
            base = self.kind
        if self.pre_downsample is not None and self.kind in ("chamfer", "dcd"):
            base += f"[vds {self.pre_downsample:g}]"
        return base

    def params(self) -> dict[str, Any]:
        """Only the parameters this kind uses."""
        p: dict[str, Any] = {}
        if self.kind == "dcd":
            p["alpha"] = self.alpha
        if self.kind in ("chamfer", "dcd") and self.pre_downsample is not None:
            p["pre_downsample"] = self.pre_downsample
        if self.kind == "histogram":
            s = self.sampling
            p["sampling"] = {"random": {"n": s.n}} if isinstance(s, RandomSampling) else {"voxel": {"cell": s.cell}}
            p.update(bins=self.bins, minkowski_order=self.minkowski_order, seed=self.seed)
        if self.kind == "voxel_iou":
            p["voxel_size"] = self.voxel_size
        if self.kind == "bev":
            p["cell_size"] = self.cell_size
        if self.kind == "icp":
            p.update(asdict(self.icp))
        if self.kind == "emd":
            p["cap"] = self.emd_cap
        return p

    def to_dict(self) -> dict[str, Any]:
        return {"metric": self.kind, "params": self.params()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricSpec":
        kind = d.get("metric", d.get("kind"))
        params = dict(d.get("params", {}))
        params.update({k: v for k, v in d.items() if k not in ("metric", "kind", "params")})
        kw: dict[str, Any] = {}
        if "sampling" in params:
            s = params.pop("sampling")
            if "random" in s:
                kw["sampling"] = RandomSampling(int(s["random"]["n"]))
            elif "voxel" in s:
                kw["sampling"] = VoxelSampling(float(s["voxel"]["cell"]))
            else:
                raise PreconditionError(f"unknown sampling {s!r}")
        icp_keys = {"max_iterations", "convergence_tol", "max_correspondence_dist"}
        icp_kw = {k: params.pop(k) for k in list(params) if k in icp_keys}
        if icp_kw:
            kw["icp"] = IcpParams(**icp_kw)
        if "cap" in params:
            kw["emd_cap"] = int(params.pop("cap"))
        for k, v in params.items():
            if k not in cls.__dataclass_fields__:
                raise PreconditionError(f"unknown metric parameter {k!r}")
            kw[k] = v
        return cls(kind, **kw)


@dataclass(frozen=True)
class MetricResult:
    value: float
    orientation: str
    wall_time: float
    spec: MetricSpec
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "metric": self.spec.kind,
            "params": self.spec.params(),
            "value": self.value,
            "orientation": self.orientation,
            "wall_time_s": self.wall_time,
        }
        if self.details:
            out["details"] = self.details
        return out

    @property
    def identity_value(self) -> float:
        return 1.0 if self.orientation == SIMILARITY else 0.0


def _check_nonempty(*clouds: PointCloud) -> None:
    for c in clouds:
        if c.is_empty:
            raise EmptyCloudError("metrics are undefined for empty clouds")


def _mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / len(values)


def _timed(spec: MetricSpec, fn: Callable[[], tuple[float, dict]]) -> MetricResult:
    t0 = time.perf_counter()
    value, details = fn()
    return MetricResult(float(value), spec.orientation, time.perf_counter() - t0, spec, details)


# -- chamfer family ----------------------------------------------------------


def _maybe_downsample(a: PointCloud, b: PointCloud, cell: Optional[float]):
    if cell is None:
        return a, b
    return downsample_voxel(a, cell), downsample_voxel(b, cell)


def _chamfer_value(a: np.ndarray, b: np.ndarray) -> float:
    _, d2_ab = SpatialIndex(b).query(a)
    _, d2_ba = SpatialIndex(a).query(b)
    return _mean(d2_ab) + _mean(d2_ba)


def _dcd_term(ids: np.ndarray, d2: np.ndarray, target_n: int, alpha: float) -> float:
    hits = np.bincount(ids, minlength=target_n)
    n_hat = np.maximum(hits[ids], 1)
    terms = 1.0 - np.exp(-alpha * np.sqrt(d2)) / n_hat
    return _mean(terms)


def _dcd_value(a: np.ndarray, b: np.ndarray, alpha: float) -> float:
    ids_ab, d2_ab = SpatialIndex(b).query(a)
    ids_ba, d2_ba = SpatialIndex(a).query(b)
    term_a = _dcd_term(ids_ab, d2_ab, len(b), alpha)
    term_b = _dcd_term(ids_ba, d2_ba, len(a), alpha)
    return 0.5 * (term_a + term_b)


def chamfer(a: PointCloud, b: PointCloud, pre_downsample: Optional[float] = None) -> MetricResult:
    """Sum of the two mean squared nearest-neighbour distances (m²)."""
    _check_nonempty(a, b)
    spec = MetricSpec("chamfer", pre_downsample=pre_downsample)

    def run():
        x, y = _maybe_downsample(a, b, pre_downsample)
        return _chamfer_value(x.points, y.points), {}

    return _timed(spec, run)


def dcd(a: PointCloud, b: PointCloud, alpha: float = 1.0, pre_downsample: Optional[float] = None) -> MetricResult:
    """Density-aware chamfer distance, bounded in [0, 1].

    Each query point contributes ``1 - exp(-alpha * d) / n`` where ``d`` is the
    (unsquared) distance to its nearest neighbour in the other cloud and ``n``
    the number of query points sharing that neighbour.
    """
    _check_nonempty(a, b)
    spec = MetricSpec("dcd", alpha=alpha, pre_downsample=pre_downsample)

    def run():
        x, y = _maybe_downsample(a, b, pre_downsample)
        return _dcd_value(x.points, y.points, alpha), {}

    return _timed(spec, run)


# -- earth mover's distance --------------------------------------------------


def emd(a: PointCloud, b: PointCloud, cap: int = EMD_DEFAULT_CAP) -> MetricResult:
    """Exact earth mover's distance between equal-size clouds.

    ``value`` is the mean per-point transport cost; ``details['total']`` the
    minimum total over all bijections.
    """
    _check_nonempty(a, b)
    if len(a) != len(b):
        raise PreconditionError(f"EMD requires equal cardinality, got {len(a)} and {len(b)} points")
    if len(a) > cap:
        raise PreconditionError(
            f"EMD on {len(a)} points exceeds the cap of {cap}; downsample both clouds first"
        )
    spec = MetricSpec("emd", emd_cap=cap)

    def run():
        cost = np.sqrt(squared_distances(a.points[:, None, :], b.points[None, :, :]))
        rows, cols = linear_sum_assignment(cost)
        total = math.fsum(cost[rows, cols].tolist())
        return total / len(a), {"total": total}

    return _timed(spec, run)


# -- histogram of pairwise distances -----------------------------------------


def _sample(cloud: PointCloud, sampling: Sampling, seed: int) -> np.ndarray:
    if isinstance(sampling, VoxelSampling):
        return downsample_voxel(cloud, sampling.cell).points
    if sampling.n >= len(cloud):
        return cloud.points
    return cloud.points[rng.sample_indices(rng.stream(seed), len(cloud), sampling.n)]


def _diameter(pts: np.ndarray) -> float:
    cand = pts
    if len(pts) > 64:
        try:
            cand = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            cand = pts
    best = 0.0
    for s in range(0, len(cand), 1024):
        best = max(best, float(cdist(cand[s:s + 1024], cand).max()))
    return best


def pairwise_distance_histogram(pts: np.ndarray, bins: int, block: int = 512) -> np.ndarray:
    """Unit-sum frequency vector of all pairwise distances, normalised by the largest one."""
    n = len(pts)
    if n < 2:
        raise DegenerateCloudError(f"histogram needs at least 2 points after sampling, got {n}")
    dmax = _diameter(pts)
    if dmax == 0.0:
        raise DegenerateCloudError("all sampled points coincide; maximum pairwise distance is 0")
    counts = np.zeros(bins, dtype=np.int64)
    for s in range(0, n - 1, block):
        e = min(s + block, n)
        d = cdist(pts[s:e], pts[s:])
        # keep j > i only
        tri = np.triu(np.ones((e - s, e - s), dtype=bool), k=1)
        mask = np.ones(d.shape, dtype=bool)
        mask[:, : e - s] = tri
        idx = np.minimum((d[mask] / dmax * bins).astype(np.int64), bins - 1)
        counts += np.bincount(idx, minlength=bins)
    return counts / counts.sum()


def _histogram_value(a: PointCloud, b: PointCloud, spec: MetricSpec) -> tuple[float, dict]:
    s0 = rng.derive_seed(spec.seed, "histogram", 0)
    s1 = rng.derive_seed(spec.seed, "histogram", 1)
    # seeds follow content order so that f(a, b) == f(b, a) while f(a, a) still draws two samples
    if a.digest() > b.digest():
        s0, s1 = s1, s0
    ha = pairwise_distance_histogram(_sample(a, spec.sampling, s0), spec.bins)
    hb = pairwise_distance_histogram(_sample(b, spec.sampling, s1), spec.bins)
    p = spec.minkowski_order
    diff = np.abs(ha - hb)
    if math.isinf(p):
        dist = float(diff.max())
    else:
        dist = math.fsum((diff ** p).tolist()) ** (1.0 / p)
    return spec.bins * dist, {}


def histogram_distance(
    a: PointCloud,
    b: PointCloud,
    sampling: Optional[Sampling] = None,
    bins: int = 256,
    minkowski_order: float = 1.0,
    seed: int = 0,
) -> MetricResult:
    """Minkowski distance between the pairwise-distance histograms of two clouds, times ``bins``.

    Each cloud is sampled on its own (random subset or voxel centroids) and its
    distances are normalised by that cloud's own largest pairwise distance.
    """
    _check_nonempty(a, b)
    spec = MetricSpec(
        "histogram", sampling=sampling, bins=bins, minkowski_order=minkowski_order, seed=seed
    )
    return _timed(spec, lambda: _histogram_value(a, b, spec))


# -- ICP ---------------------------------------------------------------------


def best_rigid_transform(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation R and translation t with ``dst ≈ src @ R.T + t``."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, cd - r @ cs


def _icp(source: np.ndarray, target: np.ndarray, params: IcpParams) -> tuple[float, dict]:
    index = SpatialIndex(target)
    max_d2 = params.max_correspondence_dist ** 2
    rot, trans = np.eye(3), np.zeros(3)
    prev_err = None
    iterations = 0
    for it in range(1, params.max_iterations + 1):
        iterations = it
        moved = source @ rot.T + trans
        ids, d2 = index.query(moved)
        inl = d2 <= max_d2
        if not inl.any():
            raise RegistrationDiverged(it)
        err = _mean(np.sqrt(d2[inl]))
        if err == 0.0:
            break
        if prev_err is not None and abs(prev_err - err) < params.convergence_tol:
            break
        prev_err = err
        r_step, t_step = best_rigid_transform(moved[inl], target[ids[inl]])
        rot, trans = r_step @ rot, r_step @ trans + t_step

    moved = source @ rot.T + trans
    _, d2 = index.query(moved)
    inl = d2 <= max_d2
    if not inl.any():
        raise RegistrationDiverged(iterations)
    transform = np.eye(4)
    transform[:3, :3], transform[:3, 3] = rot, trans
    details = {
        "iterations": iterations,
        "fitness": float(inl.mean()),
        "transform": transform.tolist(),
    }
    return math.sqrt(_mean(d2[inl])), details


def icp_rmse(source: PointCloud, target: PointCloud, params: IcpParams = IcpParams()) -> MetricResult:
    """Inlier RMSE after point-to-point ICP from the identity. Not symmetric."""
    _check_nonempty(source, target)
    spec = MetricSpec("icp", icp=params)
    return _timed(spec, lambda: _icp(source.points, target.points, params))


# -- occupancy metrics -------------------------------------------------------


def _row_set_sizes(ka: np.ndarray, kb: np.ndarray) -> tuple[int, int]:
    both = np.unique(np.vstack([ka, kb]), axis=0, return_counts=True)[1]
    return int((both == 2).sum()), len(both)


def voxel_iou(a: PointCloud, b: PointCloud, voxel_size: float = 0.5) -> MetricResult:
    """Intersection over union of the occupied voxel sets (origin-anchored grid)."""
    _check_nonempty(a, b)
    spec = MetricSpec("voxel_iou", voxel_size=voxel_size)

    def run():
        inter, union = _row_set_sizes(occupied(a.points, voxel_size), occupied(b.points, voxel_size))
        return inter / union, {"intersection": inter, "union": union}

    return _timed(spec, run)


def _bev_cells(xy: np.ndarray, origin: np.ndarray, cell: float) -> tuple[np.ndarray, np.ndarray]:
    ij = np.floor((xy - origin) / cell).astype(np.int64)
    keys, counts = np.unique(ij, axis=0, return_counts=True)
    return keys, counts / len(xy)


def bev_distance(a: PointCloud, b: PointCloud, cell_size: float = 0.5) -> MetricResult:
    """L1 distance between the normalised top-down (x-y) occupancy histograms, in [0, 2]."""
    _check_nonempty(a, b)
    spec = MetricSpec("bev", cell_size=cell_size)

    def run():
        origin = np.minimum(a.points[:, :2].min(axis=0), b.points[:, :2].min(axis=0))
        ka, pa = _bev_cells(a.points[:, :2], origin, cell_size)
        kb, pb = _bev_cells(b.points[:, :2], origin, cell_size)
        keys, inverse = np.unique(np.vstack([ka, kb]), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        grid = np.zeros((2, len(keys)))
        grid[0, inverse[: len(ka)]] = pa
        grid[1, inverse[len(ka):]] = pb
        return math.fsum(np.abs(grid[0] - grid[1]).tolist()), {"cells": len(keys)}

    return _timed(spec, run)


# -- dispatch ----------------------------------------------------------------


def evaluate(spec: MetricSpec, a: PointCloud, b: PointCloud) -> MetricResult:
    """Evaluate ``spec`` on the ordered pair (a, b)."""
    if spec.kind == "chamfer":
        res = chamfer(a, b, spec.pre_downsample)
    elif spec.kind == "dcd":
        res = dcd(a, b, spec.alpha, spec.pre_downsample)
    elif spec.kind == "emd":
        res = emd(a, b, spec.emd_cap)
    elif spec.kind == "histogram":
        res = histogram_distance(a, b, spec.sampling, spec.bins, spec.minkowski_order, spec.seed)
    elif spec.kind == "icp":
        res = icp_rmse(a, b, spec.icp)
    elif spec.kind == "voxel_iou":
        res = voxel_iou(a, b, spec.voxel_size)
    else:
        res = bev_distance(a, b, spec.cell_size)
    return replace(res, spec=spec)


# -- recommendation and intensity correction ---------------------------------


@dataclass(frozen=True)
class TwoStepResult:
    dcd_alpha1: float
    chamfer: Optional[float]
    verdict: str
    threshold: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def two_step_compare(a: PointCloud, b: PointCloud, threshold: float = 0.9) -> TwoStepResult:
    """Screen with DCD at alpha=1; if it exceeds ``threshold``, grade the gap with chamfer."""
    score = dcd(a, b, 1.0).value
    if score > threshold:
        return TwoStepResult(score, chamfer(a, b).value, "dissimilar", threshold)
    return TwoStepResult(score, None, "similar", threshold)


def transfer_intensity(sim: PointCloud, real: PointCloud, radius: float = 1.0) -> tuple[PointCloud, float]:
    """Copy intensity from the nearest real point within ``radius`` onto the simulated geometry.

    Unmatched points keep their simulated intensity (0 when the simulated cloud
    has none). Returns the corrected cloud and the matched fraction.
    """
    if not real.has_intensity:
        raise PreconditionError("intensity transfer needs a real scan with intensity")
    if not radius > 0:
        raise PreconditionError(f"radius must be positive, got {radius!r}")
    _check_nonempty(real)
    if sim.is_empty:
        return sim, 0.0
    ids, d2 = SpatialIndex(real.points).query(sim.points)
    matched = np.sqrt(d2) <= radius
    out = sim.intensity.copy() if sim.has_intensity else np.zeros(len(sim))
    out[matched] = real.intensity[ids[matched]]
    return sim.with_points(sim.points, out), float(matched.sum()) / len(sim)
