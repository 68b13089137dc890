"""Synthetic LiDAR-like scans for benchmarks and tests.

A seeded street scene (ground plane, box buildings and vehicles, vertical
poles) is ray-cast by a spinning multi-channel scanner. Scans come back in
the sensor frame, so they are origin-centred ring patterns like real
velodyne sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .pointcloud import Odometry, PointCloud


@dataclass(frozen=True)
class Scanner:
    channels: int = 32
    columns: int = 720
    fov_down_deg: float = -25.0
    fov_up_deg: float = 5.0
    max_range: float = 80.0
    height: float = 1.8
    range_noise: float = 0.01


@dataclass(frozen=True)
class Scene:
    boxes_min: np.ndarray
    boxes_max: np.ndarray
    box_reflectance: np.ndarray
    poles_xy: np.ndarray
    poles_radius: np.ndarray
    poles_height: np.ndarray
    length: float = field(default=200.0)


def make_scene(seed: int, length: float = 200.0, street_half_width: float = 8.0) -> Scene:
    """Buildings lining both sides of a straight street along +x, parked cars and poles."""
    gen = rng.stream(rng.derive_seed(seed, "scene"))
    u = lambda *shape: rng.uniform(gen, shape)  # noqa: E731
    mins, maxs, refl = [], [], []
    for side in (-1.0, 1.0):
        x = -length / 2
        while x < length / 2:
            w = 6.0 + 14.0 * u(1)[0]
            depth = 8.0 + 12.0 * u(1)[0]
            h = 4.0 + 20.0 * u(1)[0]
            setback = street_half_width + 2.0 + 6.0 * u(1)[0]
            y0 = setback if side > 0 else -setback - depth
            mins.append([x, y0, 0.0])
            maxs.append([x + w, y0 + depth, h])
            refl.append(0.3 + 0.5 * u(1)[0])
            x += w + 1.0 + 8.0 * u(1)[0]
        # parked cars
        x = -length / 2
        while x < length / 2:
            if u(1)[0] < 0.6:
                y_c = side * (street_half_width - 1.2)
                mins.append([x, y_c - 0.9, 0.0])
                maxs.append([x + 4.2, y_c + 0.9, 1.5])
                refl.append(0.6 + 0.3 * u(1)[0])
            x += 5.0 + 10.0 * u(1)[0]
    n_poles = int(length / 6)
    px = (u(n_poles) - 0.5) * length
    py = np.where(u(n_poles) < 0.5, -1.0, 1.0) * (street_half_width + 0.5 + u(n_poles))
    return Scene(
        boxes_min=np.asarray(mins),
        boxes_max=np.asarray(maxs),
        box_reflectance=np.asarray(refl),
        poles_xy=np.column_stack([px, py]),
        poles_radius=0.1 + 0.3 * u(n_poles),
        poles_height=3.0 + 6.0 * u(n_poles),
        length=length,
    )


def _ray_directions(sc: Scanner, yaw: float) -> np.ndarray:
    elev = np.deg2rad(np.linspace(sc.fov_down_deg, sc.fov_up_deg, sc.channels))
    azim = yaw + np.linspace(-np.pi, np.pi, sc.columns, endpoint=False)
    el, az = np.meshgrid(elev, azim, indexing="ij")
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1).reshape(-1, 3)


def _hit_boxes(origin: np.ndarray, dirs: np.ndarray, bmin: np.ndarray, bmax: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (bmin[None, :, :] - origin) * inv[:, None, :]
        t2 = (bmax[None, :, :] - origin) * inv[:, None, :]
    tnear = np.nanmax(np.minimum(t1, t2), axis=2)
    tfar = np.nanmin(np.maximum(t1, t2), axis=2)
    hit = (tfar >= tnear) & (tnear > 0)
    t = np.where(hit, tnear, np.inf)
    which = np.argmin(t, axis=1)
    return t[np.arange(len(dirs)), which], which


def _hit_poles(origin, dirs, xy, radius, height):
    ox, oy = origin[0] - xy[:, 0], origin[1] - xy[:, 1]
    a = dirs[:, 0:1] ** 2 + dirs[:, 1:2] ** 2
    b = 2 * (dirs[:, 0:1] * ox + dirs[:, 1:2] * oy)
    c = ox ** 2 + oy ** 2 - radius ** 2
    disc = b * b - 4 * a * c
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (-b - np.sqrt(disc)) / (2 * a)
    z = origin[2] + t * dirs[:, 2:3]
    ok = (disc >= 0) & (t > 0) & (z >= 0) & (z <= height)
    t = np.where(ok, t, np.inf)
    return t.min(axis=1)


def raycast(scene: Scene, position, yaw: float = 0.0, scanner: Scanner = Scanner(), seed: int = 0) -> PointCloud:
    """One sweep from ``position`` (x, y on the ground; sensor at ``scanner.height``)."""
    origin = np.array([position[0], position[1], scanner.height], dtype=np.float64)
    dirs = _ray_directions(scanner, yaw)
    with np.errstate(divide="ignore"):
        t_ground = np.where(dirs[:, 2] < 0, -origin[2] / dirs[:, 2], np.inf)
    t_box, which = _hit_boxes(origin, dirs, scene.boxes_min, scene.boxes_max)
    t_pole = _hit_poles(origin, dirs, scene.poles_xy, scene.poles_radius, scene.poles_height)
    t = np.minimum(np.minimum(t_ground, t_box), t_pole)
    keep = t <= scanner.max_range
    t, dirs = t[keep], dirs[keep]
    refl = np.where(t == t_box[keep], scene.box_reflectance[which[keep]], np.where(t == t_ground[keep], 0.2, 0.5))
    gen = rng.stream(rng.derive_seed(seed, "range-noise"))
    t = t + rng.normal(gen, t.shape) * scanner.range_noise
    pts = dirs * t[:, None]
    # sensor frame: rotate world offsets by -yaw
    c, s = np.cos(-yaw), np.sin(-yaw)
    pts = pts @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]).T
    intensity = np.clip(refl * np.exp(-0.02 * t), 0.0, 1.0)
    q = (0.0, 0.0, float(np.sin(yaw / 2)), float(np.cos(yaw / 2)))
    return PointCloud(pts, intensity, pose=Odometry((float(origin[0]), float(origin[1]), float(origin[2])), q))


def scan_sequence(
    n_scans: int, seed: int = 0, spacing: float = 6.0, scanner: Scanner = Scanner()
) -> list[PointCloud]:
    """``n_scans`` sweeps taken every ``spacing`` meters along the street of one scene."""
    scene = make_scene(seed)
    gen = rng.stream(rng.derive_seed(seed, "trajectory"))
    start = -spacing * (n_scans - 1) / 2
    scans = []
    for i in range(n_scans):
        lateral, yaw = (rng.uniform(gen, 2) - 0.5) * np.array([2.0, 0.2])
        scan = raycast(scene, (start + i * spacing, lateral), yaw, scanner, seed=rng.derive_seed(seed, i))
        scans.append(PointCloud(scan.points, scan.intensity, frame_id=f"scan{i:03d}", pose=scan.pose))
    return scans


def uniform_cloud(n: int, seed: int, extent: float = 50.0) -> PointCloud:
    """``n`` points uniform in a cube of side ``extent`` centred on the origin, with intensity."""
    gen = rng.stream(seed)
    pts = (rng.uniform(gen, (n, 3)) - 0.5) * extent
    return PointCloud(pts, rng.uniform(gen, n))
