"""Point cloud container and PLY reading/writing.

The reader accepts ASCII and binary-little-endian PLY files whose vertex
element carries ``x, y, z`` plus optionally an intensity channel (property
``intensity`` or ``reflectivity``) and a per-point timestamp (``time``,
``t``, or ``timestamp``). Raw intensities and timestamps are min-max
normalized to [0, 1] on load; points with non-finite coordinates or
intensities are dropped (the count is logged).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError

log = logging.getLogger(__name__)

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_INTENSITY_NAMES = ("intensity", "reflectivity")
_TIME_NAMES = ("time", "t", "timestamp")


@dataclass(eq=False)
class PointCloud:
    """Points in the LiDAR frame with normalized intensities and optional times."""

    points: np.ndarray
    intensities: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.intensities = np.asarray(self.intensities, dtype=np.float64).reshape(-1)
        if len(self.intensities) != len(self.points):
            raise ValueError("points and intensities must have equal length")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
            if len(self.times) != len(self.points):
                raise ValueError("points and times must have equal length")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, index) -> "PointCloud":
        times = self.times[index] if self.times is not None else None
        return PointCloud(self.points[index], self.intensities[index], times)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Map values to [0, 1] by min-max scaling; constant input maps to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(initial=np.inf), values.max(initial=-np.inf)
    if not np.isfinite(lo) or hi - lo < 1e-300:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _parse_header(f) -> tuple[str, int, list[tuple[str, str]], int]:
    magic = f.readline().strip()
    if magic != b"ply":
        raise SchemaError("not a PLY file (missing 'ply' magic)")
    fmt = None
    vertex_count = None
    properties: list[tuple[str, str]] = []
    in_vertex = False
    header_len = len(magic) + 1
    while True:
        line = f.readline()
        if not line:
            raise SchemaError("unterminated PLY header")
        header_len += len(line)
        tokens = line.decode("ascii", errors="replace").strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            if tokens[1] == "vertex":
                vertex_count = int(tokens[2])
                in_vertex = True
            else:
                if vertex_count is None and int(tokens[2]) > 0:
                    raise SchemaError("PLY elements before 'vertex' are not supported")
                in_vertex = False
        elif tokens[0] == "property" and in_vertex:
            if tokens[1] == "list":
                raise SchemaError("list properties on the vertex element are not supported")
            if tokens[1] not in _PLY_DTYPES:
                raise SchemaError(f"unsupported PLY property type {tokens[1]!r}")
            properties.append((tokens[2], _PLY_DTYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise SchemaError(f"unsupported PLY format {fmt!r}")
    if vertex_count is None:
        raise SchemaError("PLY file has no vertex element")
    return fmt, vertex_count, properties, header_len


def _read_vertex_table(path: Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        fmt, count, properties, _ = _parse_header(f)
        names = [name for name, _ in properties]
        for required in ("x", "y", "z"):
            if required not in names:
                raise SchemaError(f"{path}: vertex element lacks property {required!r}")
        if fmt == "ascii":
            rows = []
            for i in range(count):
                line = f.readline()
                if not line:
                    raise SchemaError(f"{path}: expected {count} vertices, got {i}")
                rows.append([float(v) for v in line.split()[: len(names)]])
            table = np.asarray(rows, dtype=np.float64).reshape(count, len(names))
            return {name: table[:, i] for i, name in enumerate(names)}
        dtype = np.dtype([(name, "<" + kind) for name, kind in properties])
        raw = f.read(dtype.itemsize * count)
        if len(raw) < dtype.itemsize * count:
            raise SchemaError(f"{path}: truncated binary vertex data")
        records = np.frombuffer(raw, dtype=dtype, count=count)
        return {name: records[name].astype(np.float64) for name in names}


def load_cloud(path) -> PointCloud:
    """Read a PLY point cloud, normalizing intensity and time channels to [0, 1]."""
    path = Path(path)
    columns = _read_vertex_table(path)
    points = np.stack([columns["x"], columns["y"], columns["z"]], axis=1)

    raw_intensity = None
    for name in _INTENSITY_NAMES:
        if name in columns:
            raw_intensity = columns[name]
            break
    if raw_intensity is None:
        log.warning("%s: no intensity/reflectivity property, defaulting to zeros", path)
        raw_intensity = np.zeros(len(points))

    raw_time = None
    for name in _TIME_NAMES:
        if name in columns:
            raw_time = columns[name]
            break

    keep = np.all(np.isfinite(points), axis=1) & np.isfinite(raw_intensity)
    dropped = int(len(points) - keep.sum())
    if dropped:
        log.warning("%s: dropped %d non-finite points", path, dropped)
        points = points[keep]
        raw_intensity = raw_intensity[keep]
        if raw_time is not None:
            raw_time = raw_time[keep]

    times = minmax_normalize(raw_time) if raw_time is not None else None
    return PointCloud(points, minmax_normalize(raw_intensity), times)


def save_cloud(cloud: PointCloud, path, *, binary: bool = True) -> None:
    """Write a PLY file (double-precision properties, so reload is exact)."""
    path = Path(path)
    names = ["x", "y", "z", "intensity"]
    columns = [cloud.points[:, 0], cloud.points[:, 1], cloud.points[:, 2], cloud.intensities]
    if cloud.times is not None:
        names.append("time")
        columns.append(cloud.times)
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {len(cloud)}")
    header.extend(f"property double {name}" for name in names)
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        table = np.stack(columns, axis=1)
        if binary:
            dtype = np.dtype([(name, "<f8") for name in names])
            records = np.zeros(len(cloud), dtype=dtype)
            for name, col in zip(names, columns):
                records[name] = col
            f.write(records.tobytes())
        else:
            for row in table:
                f.write((" ".join(repr(float(v)) for v in row) + "\n").encode("ascii"))
