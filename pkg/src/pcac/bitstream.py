"""Bitstream container: CRC-protected header plus per-slice coded segments.

Layout, all little-endian:

    magic "PCAC" | version u8 | flags u8 | point_count u32 | slice_count u16
    per slice: depth u8 | Q f32 | delta f32 | tau f32 | map_len u32 | map u32[]
    CRC32 u32 over everything above
    per slice: segment_len u32 | segment bytes

Geometry never rides in the stream (it is side information); the header's
index maps plus the partition parameters are enough for the decoder to
rebuild the identical blocks. A map_len of 0 means the identity map (the
slice holds every point in frame order), which keeps single-slice streams
from paying 4 bytes per point. delta/tau of 0 mean "derive per block from
geometry". Each segment carries its own trailing CRC32 (see entropy module).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"PCAC"
VERSION = 1


class BitstreamError(Exception):
    """Base class for container-level failures."""


class FormatError(BitstreamError):
    """Bad magic, unknown version, or malformed structure."""


class CrcError(BitstreamError):
    """Header checksum mismatch."""


class TruncatedError(BitstreamError):
    """Stream ends before the structure it promises."""


@dataclass(frozen=True)
class SliceHeader:
    depth: int
    q: float
    delta: float   # 0.0 = per-block adaptive
    tau: float     # 0.0 = per-block adaptive
    index_map: np.ndarray | None  # None = identity (all points, frame order)


@dataclass(frozen=True)
class BitstreamHeader:
    point_count: int
    slices: list = field(default_factory=list)
    flags: int = 0

    @property
    def slice_count(self) -> int:
        return len(self.slices)


def write_bitstream(header: BitstreamHeader, segments: list[bytes]) -> bytes:
    if len(segments) != header.slice_count:
        raise ValueError(
            f"{header.slice_count} slice headers but {len(segments)} segments"
        )
    out = bytearray()
    out += MAGIC
    out += struct.pack("<BBIH", VERSION, header.flags, header.point_count,
                       header.slice_count)
    for sl in header.slices:
        idx = sl.index_map
        map_len = 0 if idx is None else len(idx)
        out += struct.pack("<BfffI", sl.depth, sl.q, sl.delta, sl.tau, map_len)
        if idx is not None:
            out += np.asarray(idx, dtype="<u4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    for seg in segments:
        out += struct.pack("<I", len(seg))
        out += seg
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"needed {n} bytes at offset {self.pos}, stream has {len(self.data)}"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_bitstream(data: bytes) -> tuple[BitstreamHeader, list[bytes]]:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("bad magic: not a PCAC stream")
    version, flags, point_count, slice_count = r.unpack("<BBIH")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    slices = []
    for _ in range(slice_count):
        depth, q, delta, tau, map_len = r.unpack("<BfffI")
        if map_len:
            idx = np.frombuffer(r.take(4 * map_len), dtype="<u4").astype(np.int64)
        else:
            idx = None
        slices.append(SliceHeader(depth=depth, q=float(q), delta=float(delta),
                                  tau=float(tau), index_map=idx))
    header_end = r.pos
    (crc_stored,) = r.unpack("<I")
    if zlib.crc32(data[:header_end]) != crc_stored:
        raise CrcError("header checksum mismatch")
    segments = []
    for _ in range(slice_count):
        (seg_len,) = r.unpack("<I")
        segments.append(r.take(seg_len))
    return BitstreamHeader(point_count=point_count, slices=slices, flags=flags), segments
