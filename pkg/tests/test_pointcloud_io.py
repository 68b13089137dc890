import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import cloud
from oracles import brute_bounds
from scangap import fileio
from scangap.errors import EmptyCloudError, FormatError, ValidationError
from scangap.pointcloud import Odometry, PointCloud, bounds


def test_pointcloud_rejects_non_finite():
    with pytest.raises(ValidationError, match="row 1"):
        cloud([[0, 0, 0], [np.nan, 0, 0]])


def test_pointcloud_intensity_length_checked():
    with pytest.raises(ValidationError):
        cloud([[0, 0, 0], [1, 1, 1]], intensity=[0.5])


def test_empty_cloud_is_representable():
    c = cloud(np.zeros((0, 3)))
    assert len(c) == 0 and c.is_empty


def test_cloud_is_immutable():
    c = cloud([[0, 0, 0]])
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


def test_odometry_requires_unit_quaternion():
    Odometry((1, 2, 3), (0, 0, 0, 1))
    with pytest.raises(ValidationError):
        Odometry((1, 2, 3), (0, 0, 0.1, 1))


# -- bounds ----------------------------------------------------------------


def test_bounds_two_points():
    box = bounds(cloud([[0, 0, 0], [1, 2, 3]]))
    assert box.min.tolist() == [0, 0, 0] and box.max.tolist() == [1, 2, 3]


def test_bounds_single_point():
    box = bounds(cloud([[4.0, -1.0, 2.5]]))
    assert np.array_equal(box.min, box.max)


def test_bounds_matches_component_scan(rs):
    pts = rs.normal(size=(100, 3)) * 10
    lo, hi = brute_bounds(pts.tolist())
    box = bounds(cloud(pts))
    assert np.array_equal(box.min, lo) and np.array_equal(box.max, hi)


def test_bounds_empty_rejected():
    with pytest.raises(EmptyCloudError):
        bounds(cloud(np.zeros((0, 3))))


@given(arrays(np.float64, st.tuples(st.integers(1, 50), st.just(3)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_bounds_contains_every_point(pts):
    assert bounds(cloud(pts)).contains(pts).all()


# -- PLY -------------------------------------------------------------------


def test_ascii_ply_minimal(tmp_path):
    p = tmp_path / "tri.ply"
    p.write_text(
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n1 0 0\n0 1 0.5\n"
    )
    c = fileio.load_ply(p)
    assert len(c) == 3 and not c.has_intensity
    assert c.points[2].tolist() == [0, 1, 0.5]


def _reference_binary_ply(path, rows):
    """Independent writer: header text plus packed '<ffff' records."""
    head = (
        "ply\nformat binary_little_endian 1.0\ncomment reference\nelement vertex {}\n"
        "property float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n"
    ).format(len(rows)).encode()
    body = b"".join(struct.pack("<ffff", *r) for r in rows)
    path.write_bytes(head + body)


def test_binary_ply_with_intensity_bit_exact(tmp_path, rs):
    rows = rs.uniform(-50, 50, size=(20, 4)).astype(np.float32)
    p = tmp_path / "ref.ply"
    _reference_binary_ply(p, rows.tolist())
    c = fileio.load_ply(p)
    assert c.has_intensity
    assert np.array_equal(c.points, rows[:, :3].astype(np.float64))
    assert np.array_equal(c.intensity, rows[:, 3].astype(np.float64))
    # and our writer produces the same bytes as the reference writer, minus the comment line
    ours = fileio.to_bytes(c, "ply_binary")
    assert ours == p.read_bytes().replace(b"comment reference\n", b"")


def test_ascii_ply_truncated(tmp_path):
    p = tmp_path / "short.ply"
    p.write_text(
        "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n1 1 1\n2 2 2\n3 3 3\n"
    )
    with pytest.raises(FormatError, match="5 vertices"):
        fileio.load_ply(p)


def test_binary_ply_truncated(tmp_path):
    p = tmp_path / "short.ply"
    _reference_binary_ply(p, [[0, 0, 0, 0]] * 4)
    data = p.read_bytes().replace(b"vertex 4", b"vertex 5")
    p.write_bytes(data)
    with pytest.raises(FormatError) as exc:
        fileio.load_ply(p)
    assert exc.value.offset == len(data)


def test_malformed_header_reports_offset(tmp_path):
    p = tmp_path / "bad.ply"
    p.write_bytes(b"ply\nformat ascii 1.0\nelement vertex three\nend_header\n")
    with pytest.raises(FormatError, match="byte offset 21"):
        fileio.load_ply(p)


def test_not_a_ply(tmp_path):
    p = tmp_path / "x.ply"
    p.write_bytes(b"hello")
    with pytest.raises(FormatError):
        fileio.load_ply(p)


def test_ply_non_finite_names_row(tmp_path):
    p = tmp_path / "nan.ply"
    p.write_text(
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\nnan 1 1\n"
    )
    with pytest.raises(ValidationError, match="row 1"):
        fileio.load_ply(p)


def test_ply_faces_ignored(tmp_path, caplog):
    p = tmp_path / "mesh.ply"
    p.write_text(
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
        "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    )
    c = fileio.load_ply(p)
    assert len(c) == 3
    assert "face" in caplog.text


def test_ply_double_properties(tmp_path):
    p = tmp_path / "d.ply"
    head = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n"
    p.write_bytes(head + struct.pack("<ddd", 0.1, 0.2, 0.3))
    assert fileio.load_ply(p).points.tolist() == [[0.1, 0.2, 0.3]]


# -- KITTI -------------------------------------------------------------------


def test_kitti_two_points(tmp_path):
    p = tmp_path / "two.bin"
    p.write_bytes(struct.pack("<8f", 1.0, 2.0, 3.0, 0.5, -4.0, 5.5, 6.25, 0.75))
    c = fileio.load_kitti_bin(p)
    assert c.points.tolist() == [[1, 2, 3], [-4, 5.5, 6.25]]
    assert c.intensity.tolist() == [0.5, 0.75]


def test_kitti_empty(tmp_path):
    p = tmp_path / "empty.bin"
    p.write_bytes(b"")
    assert len(fileio.load_kitti_bin(p)) == 0


def test_kitti_bad_size(tmp_path):
    p = tmp_path / "odd.bin"
    p.write_bytes(b"\0" * 17)
    with pytest.raises(FormatError):
        fileio.load_kitti_bin(p)


# -- save ------------------------------------------------------------------


def _f32_cloud(rs, n=1000, intensity=True):
    pts = rs.uniform(-80, 80, size=(n, 3)).astype(np.float32).astype(np.float64)
    inten = rs.uniform(0, 1, size=n).astype(np.float32).astype(np.float64) if intensity else None
    return PointCloud(pts, inten)


@pytest.mark.parametrize("fmt,suffix", [("ply_binary", ".ply"), ("kitti_bin", ".bin")])
def test_binary_round_trip_bit_exact(tmp_path, rs, fmt, suffix):
    c = _f32_cloud(rs)
    p = tmp_path / f"c{suffix}"
    fileio.save(c, p, fmt)
    back = fileio.load(p)
    assert np.array_equal(back.points, c.points)
    assert np.array_equal(back.intensity, c.intensity)


def test_ascii_round_trip(tmp_path, rs):
    c = PointCloud(rs.uniform(-80, 80, size=(200, 3)))
    p = tmp_path / "c.ply"
    fileio.save(c, p, "ply_ascii")
    back = fileio.load(p)
    assert np.abs(back.points - c.points).max() <= 1e-5 * 80
    assert np.allclose(back.points, c.points.astype(np.float32), rtol=0, atol=1e-6)


def test_kitti_requires_intensity(tmp_path, rs):
    with pytest.raises(FormatError, match="intensity"):
        fileio.save(_f32_cloud(rs, 10, intensity=False), tmp_path / "x.bin", "kitti_bin")
    assert not (tmp_path / "x.bin").exists()


def test_save_unwritable(tmp_path, rs):
    with pytest.raises(OSError):
        fileio.save(_f32_cloud(rs, 10), tmp_path / "missing-dir" / "x.ply", "ply_binary")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 300), st.integers(0, 2**32 - 1))
def test_ply_binary_round_trip_property(tmp_path_factory, n, seed):
    rs = np.random.default_rng(seed)
    c = _f32_cloud(rs, n)
    p = tmp_path_factory.mktemp("rt") / "c.ply"
    fileio.save(c, p, "ply_binary")
    back = fileio.load_ply(p)
    assert back == c
