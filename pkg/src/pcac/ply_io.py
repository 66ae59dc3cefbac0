"""PLY point cloud I/O and BT.709 color conversion.

Supports ascii and binary_little_endian PLY files whose vertex element
carries x,y,z (float or double) and red,green,blue (uchar). Unknown scalar
vertex properties are skipped; anything else is rejected loudly.

Colors are converted to full-range BT.709 YUV with centered (offset-free)
chroma, so the neutral color is (Y, 0, 0).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

_FLOAT_TYPES = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8"}
_UCHAR_TYPES = {"uchar": "u1", "uint8": "u1"}
# scalar property types we can skip over without interpreting
_SKIP_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}

# BT.709 luma weights; chroma divisors are 2*(1-Kb) and 2*(1-Kr).
_KR, _KG, _KB = 0.2126, 0.7152, 0.0722
_U_DIV = 1.8556
_V_DIV = 1.5748


class PlyError(Exception):
    """Base class for PLY reading/writing failures."""


class PlyParseError(PlyError):
    """Malformed header or unparseable body line."""


class PlyUnsupportedError(PlyError):
    """Well-formed PLY that this codec does not accept (encoding, properties)."""


class PlyDataError(PlyError):
    """Body shorter than the header promises (truncated file)."""


@dataclass(frozen=True)
class PointCloud:
    """A frame: per-point positions and 8-bit RGB attributes.

    positions: (n, 3) float64, finite
    rgb:       (n, 3) uint8
    """

    positions: np.ndarray
    rgb: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float64))
        rgb = np.asarray(self.rgb)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (n, 3), got {pos.shape}")
        if rgb.shape != pos.shape:
            raise ValueError(f"rgb shape {rgb.shape} does not match positions {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite coordinates")
        if rgb.dtype != np.uint8:
            as_int = np.asarray(rgb)
            if np.any((as_int < 0) | (as_int > 255)):
                raise ValueError("rgb channels must lie in [0, 255]")
            rgb = as_int.astype(np.uint8)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rgb", np.ascontiguousarray(rgb))

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.rgb, other.rgb
        )


def _parse_header(stream: io.BufferedReader):
    """Returns (format, vertex_count, property list [(name, type)], header_len)."""

    def next_line():
        raw = stream.readline()
        if not raw:
            raise PlyParseError("unexpected end of file inside header")
        return raw.decode("ascii", errors="replace").rstrip("\r\n")

    magic = next_line()
    if magic.strip() != "ply":
        raise PlyParseError(f"not a PLY file (first line {magic!r})")

    fmt = None
    vertex_count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    seen_vertex = False

    while True:
        line = next_line()
        tokens = line.split()
        if not tokens or tokens[0] == "comment" or tokens[0] == "obj_info":
            continue
        if tokens[0] == "format":
            if len(tokens) != 3:
                raise PlyParseError(f"malformed format line: {line!r}")
            if tokens[1] == "ascii":
                fmt = "ascii"
            elif tokens[1] == "binary_little_endian":
                fmt = "binary"
            else:
                raise PlyUnsupportedError(f"unsupported PLY encoding: {tokens[1]!r}")
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyParseError(f"malformed element line: {line!r}")
            if tokens[1] == "vertex":
                try:
                    vertex_count = int(tokens[2])
                except ValueError:
                    raise PlyParseError(f"bad vertex count in line: {line!r}") from None
                if vertex_count < 0:
                    raise PlyParseError(f"negative vertex count in line: {line!r}")
                in_vertex = True
                seen_vertex = True
            else:
                if not seen_vertex:
                    raise PlyUnsupportedError(
                        f"element {tokens[1]!r} precedes the vertex element"
                    )
                in_vertex = False
        elif tokens[0] == "property":
            if not in_vertex:
                continue  # properties of trailing elements we never read
            if tokens[1] == "list":
                raise PlyUnsupportedError("list properties on vertices are not supported")
            if len(tokens) != 3:
                raise PlyParseError(f"malformed property line: {line!r}")
            props.append((tokens[2], tokens[1]))
        elif tokens[0] == "end_header":
            break
        else:
            raise PlyParseError(f"unrecognized header line: {line!r}")

    if fmt is None:
        raise PlyParseError("header has no format line")
    if vertex_count is None:
        raise PlyParseError("header has no vertex element")
    return fmt, vertex_count, props


def _vertex_dtype(props: list[tuple[str, str]]) -> np.dtype:
    fields = []
    for i, (name, typ) in enumerate(props):
        if name in ("x", "y", "z"):
            if typ not in _FLOAT_TYPES:
                raise PlyUnsupportedError(f"coordinate {name!r} has non-float type {typ!r}")
            fields.append((name, _FLOAT_TYPES[typ]))
        elif name in ("red", "green", "blue"):
            if typ not in _UCHAR_TYPES:
                raise PlyUnsupportedError(f"color {name!r} has non-uchar type {typ!r}")
            fields.append((name, "u1"))
        else:
            if typ not in _SKIP_TYPES:
                raise PlyUnsupportedError(f"cannot skip property {name!r} of type {typ!r}")
            fields.append((f"_skip{i}", _SKIP_TYPES[typ]))
    names = {name for name, _ in props}
    missing = {"x", "y", "z"} - names
    if missing:
        raise PlyUnsupportedError(f"vertex element lacks coordinates: {sorted(missing)}")
    missing = {"red", "green", "blue"} - names
    if missing:
        raise PlyUnsupportedError(f"vertex element lacks color properties: {sorted(missing)}")
    return np.dtype(fields)


def load_ply(path) -> PointCloud:
    """Load a point cloud from an ascii or binary_little_endian PLY file."""
    with open(path, "rb") as f:
        fmt, count, props = _parse_header(f)
        dtype = _vertex_dtype(props)
        if fmt == "binary":
            raw = f.read(dtype.itemsize * count)
            if len(raw) < dtype.itemsize * count:
                raise PlyDataError(
                    f"binary body truncated: expected {dtype.itemsize * count} bytes, "
                    f"got {len(raw)}"
                )
            data = np.frombuffer(raw, dtype=dtype, count=count)
        else:
            data = np.empty(count, dtype=dtype)
            names = [n for n, _ in props]
            for i in range(count):
                line = f.readline()
                if not line:
                    raise PlyDataError(f"ascii body truncated at vertex {i} of {count}")
                tokens = line.split()
                if len(tokens) != len(names):
                    raise PlyParseError(
                        f"vertex line {i} has {len(tokens)} fields, expected {len(names)}: "
                        f"{line.decode('ascii', errors='replace').strip()!r}"
                    )
                try:
                    for name, tok in zip(data.dtype.names, tokens):
                        data[name][i] = float(tok) if not name.startswith("_skip") else 0
                except ValueError:
                    raise PlyParseError(
                        f"unparseable vertex line {i}: "
                        f"{line.decode('ascii', errors='replace').strip()!r}"
                    ) from None
    positions = np.column_stack([data["x"], data["y"], data["z"]]).astype(np.float64)
    rgb_f = np.column_stack([data["red"], data["green"], data["blue"]])
    if fmt == "ascii" and np.any((rgb_f < 0) | (rgb_f > 255)):
        raise PlyParseError("ascii color value outside [0, 255]")
    if positions.size and not np.all(np.isfinite(positions)):
        raise PlyDataError("non-finite coordinate in PLY body")
    return PointCloud(positions, rgb_f.astype(np.uint8))


def save_ply(cloud: PointCloud, path, fmt: str = "binary") -> None:
    """Write a point cloud as PLY. Binary mode preserves coordinate bits exactly;
    ascii mode uses shortest round-tripping decimal floats."""
    if fmt not in ("binary", "ascii"):
        raise ValueError(f"fmt must be 'binary' or 'ascii', got {fmt!r}")
    fmt_line = "binary_little_endian 1.0" if fmt == "binary" else "ascii 1.0"
    header = (
        "ply\n"
        f"format {fmt_line}\n"
        f"element vertex {cloud.count}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if fmt == "binary":
            dt = np.dtype(
                [("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                 ("red", "u1"), ("green", "u1"), ("blue", "u1")]
            )
            rec = np.empty(cloud.count, dtype=dt)
            rec["x"], rec["y"], rec["z"] = cloud.positions.T
            rec["red"], rec["green"], rec["blue"] = cloud.rgb.T
            f.write(rec.tobytes())
        else:
            lines = []
            for (x, y, z), (r, g, b) in zip(cloud.positions, cloud.rgb):
                lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}\n")
            f.write("".join(lines).encode("ascii"))


def rgb_to_yuv(rgb: np.ndarray) -> np.ndarray:
    """Full-range BT.709 RGB -> YUV with centered chroma.

    Y = 0.2126 R + 0.7152 G + 0.0722 B, U = (B - Y)/1.8556, V = (R - Y)/1.5748.
    Returns (n, 3) float64; Y in [0, 255], U and V in [-127.5, 127.5].
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    y = rgb[:, 0] * _KR + rgb[:, 1] * _KG + rgb[:, 2] * _KB
    u = (rgb[:, 2] - y) / _U_DIV
    v = (rgb[:, 0] - y) / _V_DIV
    return np.column_stack([y, u, v])


def yuv_to_rgb(yuv: np.ndarray) -> np.ndarray:
    """Inverse of `rgb_to_yuv`, rounded to nearest and clamped to [0, 255]."""
    yuv = np.asarray(yuv, dtype=np.float64)
    y, u, v = yuv[:, 0], yuv[:, 1], yuv[:, 2]
    r = y + _V_DIV * v
    b = y + _U_DIV * u
    g = (y - _KR * r - _KB * b) / _KG
    rgb = np.column_stack([r, g, b])
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
