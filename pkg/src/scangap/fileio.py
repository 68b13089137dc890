"""Reading and writing point clouds: PLY (ascii / binary little-endian) and KITTI velodyne .bin."""

from __future__ import annotations

import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .errors import FormatError, ValidationError
from .pointcloud import PointCloud

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

FORMATS = ("ply_ascii", "ply_binary", "kitti_bin")

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@contextmanager
def atomic_write(path: PathLike, mode: str = "wb") -> Iterator:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_ply_header(data: bytes):
    if not data.startswith(b"ply"):
        raise FormatError("not a PLY file: missing 'ply' magic", offset=0)
    end = data.find(b"end_header")
    if end < 0:
        raise FormatError("PLY header has no end_header line", offset=len(data))
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1

    fmt = None
    elements: list[dict] = []
    offset = 0
    for raw in data[:end].split(b"\n"):
        line_offset = offset
        offset += len(raw) + 1
        words = raw.decode("ascii", errors="replace").strip().split()
        if not words or words[0] in ("ply", "comment", "obj_info"):
            continue
        key = words[0]
        if key == "format":
            if len(words) != 3 or words[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise FormatError(f"unsupported PLY format line {raw!r}", offset=line_offset)
            if words[1] == "binary_big_endian":
                raise FormatError("binary_big_endian PLY is not supported", offset=line_offset)
            fmt = words[1]
        elif key == "element":
            if len(words) != 3 or not words[2].isdigit():
                raise FormatError(f"malformed element line {raw!r}", offset=line_offset)
            elements.append({"name": words[1], "count": int(words[2]), "props": [], "offset": line_offset})
        elif key == "property":
            if not elements:
                raise FormatError("property declared before any element", offset=line_offset)
            if len(words) == 5 and words[1] == "list":
                if words[2] not in _PLY_TYPES or words[3] not in _PLY_TYPES:
                    raise FormatError(f"unknown list property types in {raw!r}", offset=line_offset)
                elements[-1]["props"].append((words[4], "list", words[2], words[3]))
            elif len(words) == 3 and words[1] in _PLY_TYPES:
                elements[-1]["props"].append((words[2], _PLY_TYPES[words[1]]))
            else:
                raise FormatError(f"malformed property line {raw!r}", offset=line_offset)
        else:
            raise FormatError(f"unexpected header keyword {key!r}", offset=line_offset)
    if fmt is None:
        raise FormatError("PLY header lacks a format line", offset=0)
    return fmt, elements, body_start


def load_ply(path: PathLike) -> PointCloud:
    """Load the vertex element of a PLY file.

    Only ``x``, ``y``, ``z`` and an optional ``intensity`` property are read;
    other elements (faces, edges) are skipped with a warning.
    """
    data = Path(path).read_bytes()
    fmt, elements, pos = _parse_ply_header(data)
    vertex = next((e for e in elements if e["name"] == "vertex"), None)
    if vertex is None:
        raise FormatError("PLY file has no vertex element", offset=0)
    names = [p[0] for p in vertex["props"]]
    for axis in "xyz":
        if axis not in names:
            raise FormatError(f"vertex element lacks property {axis!r}", offset=vertex["offset"])
    if any(len(p) != 2 for p in vertex["props"]):
        raise FormatError("list properties on the vertex element are not supported", offset=vertex["offset"])
    others = [e["name"] for e in elements if e is not vertex]
    if others:
        log.warning("ignoring non-vertex PLY elements: %s", ", ".join(others))

    n = vertex["count"]
    if fmt == "ascii":
        table = _read_ascii_vertices(data, pos, elements, vertex)
    else:
        table = _read_binary_vertices(data, pos, elements, vertex)

    cols = {name: i for i, name in enumerate(names)}
    xyz = np.column_stack([table[:, cols[a]] for a in "xyz"]).astype(np.float64) if n else np.zeros((0, 3))
    inten = table[:, cols["intensity"]].astype(np.float64) if "intensity" in cols else None
    bad = ~np.isfinite(xyz).all(axis=1)
    if bad.any():
        raise ValidationError(f"non-finite coordinate in vertex row {int(np.flatnonzero(bad)[0])}")
    return PointCloud(xyz, inten, frame_id=Path(path).stem)


def _read_ascii_vertices(data: bytes, pos: int, elements, vertex) -> np.ndarray:
    lines = data[pos:].split(b"\n")
    start = 0
    offset = pos
    for e in elements:
        if e is vertex:
            break
        for line in lines[start:start + e["count"]]:
            offset += len(line) + 1
        start += e["count"]
    n, width = vertex["count"], len(vertex["props"])
    rows = np.empty((n, width), dtype=np.float64)
    for i in range(n):
        if start + i >= len(lines) or not lines[start + i].strip():
            raise FormatError(f"PLY declares {n} vertices but data ends after {i}", offset=offset)
        line = lines[start + i]
        fields = line.split()
        if len(fields) < width:
            raise FormatError(f"vertex row {i} has {len(fields)} values, expected {width}", offset=offset)
        try:
            rows[i] = [float(f) for f in fields[:width]]
        except ValueError:
            raise FormatError(f"unparseable number in vertex row {i}", offset=offset) from None
        offset += len(line) + 1
    return rows


def _read_binary_vertices(data: bytes, pos: int, elements, vertex) -> np.ndarray:
    for e in elements:
        if e is vertex:
            break
        if any(len(p) != 2 for p in e["props"]):
            raise FormatError(f"cannot skip list-valued element {e['name']!r} preceding vertices", offset=pos)
        pos += e["count"] * np.dtype([(p[0], "<" + p[1]) for p in e["props"]]).itemsize
    dtype = np.dtype([(p[0], "<" + p[1]) for p in vertex["props"]])
    need = vertex["count"] * dtype.itemsize
    if pos + need > len(data):
        have = max(0, (len(data) - pos) // dtype.itemsize)
        raise FormatError(
            f"PLY declares {vertex['count']} vertices but data holds only {have}", offset=len(data)
        )
    rec = np.frombuffer(data, dtype=dtype, count=vertex["count"], offset=pos)
    return np.column_stack([rec[name].astype(np.float64) for name in dtype.names]) if len(rec) else np.zeros((0, len(dtype.names)))


def load_kitti_bin(path: PathLike) -> PointCloud:
    """Load a KITTI velodyne scan: flat little-endian float32 (x, y, z, intensity) records."""
    data = Path(path).read_bytes()
    if len(data) % 16:
        raise FormatError(f"KITTI bin size {len(data)} is not a multiple of 16 bytes", offset=len(data) - len(data) % 16)
    arr = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)
    bad = ~np.isfinite(arr[:, :3]).all(axis=1)
    if bad.any():
        raise ValidationError(f"non-finite coordinate in row {int(np.flatnonzero(bad)[0])}")
    return PointCloud(arr[:, :3], arr[:, 3], frame_id=Path(path).stem)


def guess_format(path: PathLike) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".bin":
        return "kitti_bin"
    if suffix == ".ply":
        with open(path, "rb") as fh:
            head = fh.read(256)
        return "ply_ascii" if b"format ascii" in head else "ply_binary"
    raise FormatError(f"cannot infer point-cloud format from extension {suffix!r}")


def load(path: PathLike, fmt: str | None = None) -> PointCloud:
    fmt = fmt or guess_format(path)
    if fmt == "kitti_bin":
        return load_kitti_bin(path)
    if fmt in ("ply_ascii", "ply_binary", "ply"):
        return load_ply(path)
    raise FormatError(f"unknown format {fmt!r}")


def _ply_bytes(cloud: PointCloud, binary: bool) -> bytes:
    n = len(cloud)
    props = ["x", "y", "z"] + (["intensity"] if cloud.has_intensity else [])
    header = ["ply", "format binary_little_endian 1.0" if binary else "format ascii 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in props]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    cols = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2]]
    if cloud.has_intensity:
        cols.append(cloud.intensity)
    table = np.column_stack(cols).astype("<f4") if n else np.zeros((0, len(props)), dtype="<f4")
    if binary:
        return head + table.tobytes()
    # 9 significant digits round-trip any float32 exactly
    body = "".join(" ".join(f"{v:.9g}" for v in row) + "\n" for row in table.tolist())
    return head + body.encode("ascii")


def to_bytes(cloud: PointCloud, fmt: str) -> bytes:
    if fmt == "ply_binary":
        return _ply_bytes(cloud, binary=True)
    if fmt == "ply_ascii":
        return _ply_bytes(cloud, binary=False)
    if fmt == "kitti_bin":
        if not cloud.has_intensity:
            raise FormatError("kitti_bin requires per-point intensity; the cloud has none")
        table = np.column_stack([cloud.points, cloud.intensity]).astype("<f4")
        return table.tobytes()
    raise FormatError(f"unknown format {fmt!r}")


def save(cloud: PointCloud, path: PathLike, fmt: str) -> None:
    """Write ``cloud`` to ``path``. Coordinates are truncated to float32, the width of every supported format."""
    payload = to_bytes(cloud, fmt)
    with atomic_write(path) as fh:
        fh.write(payload)
