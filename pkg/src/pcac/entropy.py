"""Adaptive binary arithmetic coding of block records.

Each slice becomes one independently terminated segment: coder state and all
frequency contexts restart at the slice boundary, so slices decode in
isolation. Coefficients are zigzag-folded and binarized as adaptive
Exp-Golomb; magnitudes at or above 2^15 escape to raw bits. A CRC32 of the
packed payload rides at the end of every segment, so corrupt bodies fail
loudly instead of decoding into garbage.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import _ackernels as _k

TRANSFORM_GFT = 0
TRANSFORM_DCT = 1


class EntropyError(Exception):
    """Base class for entropy-layer failures."""


class CrcError(EntropyError):
    """Payload checksum mismatch (corrupt or truncated body)."""


class DecodeError(EntropyError):
    """Decoded field out of range (corrupt body)."""


@dataclass(frozen=True)
class BlockRecord:
    """Everything coded for one block."""

    intra_mode: int
    transform_mode: int
    scan_mode: int
    kept: int
    symbols: np.ndarray  # int32, length == kept

    def __post_init__(self):
        if not 0 <= self.intra_mode <= 5:
            raise ValueError(f"intra_mode out of range: {self.intra_mode}")
        if self.transform_mode not in (TRANSFORM_GFT, TRANSFORM_DCT):
            raise ValueError(f"transform_mode out of range: {self.transform_mode}")
        if not 0 <= self.scan_mode <= 6:
            raise ValueError(f"scan_mode out of range: {self.scan_mode}")
        if self.kept != len(self.symbols):
            raise ValueError("kept does not match symbol count")


@dataclass
class CoderState:
    """Snapshot of coder range state and contexts, for trial measurements."""

    state: np.ndarray
    contexts: np.ndarray

    def clone(self) -> "CoderState":
        return CoderState(self.state.copy(), self.contexts.copy())


def _record_bit_bound(n: int) -> int:
    # worst case per coded value is bounded by the least likely context
    # probability (16 bits) per bin plus the raw escape; generous headroom
    return 1024 + 320 * (3 * n + 4)


def _check(state: np.ndarray) -> None:
    if state[_k.ST_ERR] == _k.ERR_OVERFLOW:
        raise RuntimeError("arithmetic coder bit buffer overflow")
    if state[_k.ST_ERR] == _k.ERR_BAD_FIELD:
        raise DecodeError("block record field out of range")


class SegmentEncoder:
    """Arithmetic encoder for one slice's block records."""

    def __init__(self):
        self._state = _k.new_state()
        self._ctxs = _k.new_contexts(_k.N_RECORD_CONTEXTS)
        self._buf = np.zeros(1 << 16, dtype=np.uint8)

    @property
    def bit_count(self) -> int:
        return int(self._state[_k.ST_POS])

    def _reserve(self, bits: int) -> None:
        need = int(self._state[_k.ST_POS]) + bits
        if need > self._buf.shape[0]:
            grown = np.zeros(max(need, 2 * self._buf.shape[0]), dtype=np.uint8)
            grown[: self._buf.shape[0]] = self._buf
            self._buf = grown

    def snapshot(self) -> CoderState:
        return CoderState(self._state.copy(), self._ctxs.copy())

    def encode_record(self, record: BlockRecord, n: int) -> None:
        self._reserve(_record_bit_bound(n))
        _k.encode_record(
            self._state, self._buf, self._ctxs,
            record.intra_mode, record.transform_mode, record.scan_mode,
            record.kept, record.symbols.astype(np.int64), n,
        )
        _check(self._state)

    def finish(self) -> bytes:
        """Terminate the segment; returns payload bytes + trailing CRC32."""
        self._reserve(64)
        _k.enc_finish(self._state, self._buf)
        _check(self._state)
        payload = np.packbits(self._buf[: self.bit_count]).tobytes()
        return payload + zlib.crc32(payload).to_bytes(4, "little")


def payload_bits(snapshot: CoderState, scan_mode: int, kept: int,
                 symbols: np.ndarray, n: int) -> int:
    """Bits a candidate payload would cost from the given coder state.

    Runs a throwaway encode (scan mode, kept, symbols, terminator) against
    copies of the range state and contexts. Used by the Lagrangian transform
    decision; the terminator cost is included for both candidates alike.
    """
    trial = snapshot.clone()
    trial.state[_k.ST_POS] = 0
    trial.state[_k.ST_ERR] = 0
    buf = np.zeros(_record_bit_bound(n), dtype=np.uint8)
    _k.encode_payload(trial.state, buf, trial.contexts, scan_mode, kept,
                      np.asarray(symbols, dtype=np.int64), n)
    _k.enc_finish(trial.state, buf)
    _check(trial.state)
    return int(trial.state[_k.ST_POS])


class SegmentDecoder:
    """Arithmetic decoder for one slice segment produced by SegmentEncoder."""

    def __init__(self, segment: bytes):
        if len(segment) < 4:
            raise CrcError("segment shorter than its checksum")
        payload, crc = segment[:-4], segment[-4:]
        if zlib.crc32(payload) != int.from_bytes(crc, "little"):
            raise CrcError("segment checksum mismatch")
        self._bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
        self._state = _k.new_state()
        self._ctxs = _k.new_contexts(_k.N_RECORD_CONTEXTS)
        _k.dec_init(self._state, self._bits)

    def decode_record(self, n: int) -> BlockRecord:
        imode, tmode, smode, syms = _k.decode_record(
            self._state, self._bits, self._ctxs, n
        )
        _check(self._state)
        return BlockRecord(
            intra_mode=int(imode), transform_mode=int(tmode),
            scan_mode=int(smode), kept=len(syms),
            symbols=syms.astype(np.int32),
        )


def ac_encode(symbols) -> bytes:
    """Entropy-code a flat list of signed integers; exact round-trip with
    `ac_decode`. Adaptive model, CRC32-terminated."""
    syms = np.asarray(symbols, dtype=np.int64)
    if syms.size and np.abs(syms).max() >= 1 << 31:
        raise ValueError("symbol magnitude exceeds 31 bits")
    state = _k.new_state()
    ctxs = _k.new_contexts(_k.CTX_BANK_SIZE)
    buf = np.zeros(1024 + 320 * max(1, syms.size), dtype=np.uint8)
    _k.encode_stream(state, buf, ctxs, syms)
    _k.enc_finish(state, buf)
    _check(state)
    payload = np.packbits(buf[: int(state[_k.ST_POS])]).tobytes()
    return payload + zlib.crc32(payload).to_bytes(4, "little")


def ac_decode(data: bytes, count: int) -> np.ndarray:
    """Inverse of `ac_encode`; `count` symbols come back as int64."""
    if len(data) < 4:
        raise CrcError("stream shorter than its checksum")
    payload, crc = data[:-4], data[-4:]
    if zlib.crc32(payload) != int.from_bytes(crc, "little"):
        raise CrcError("stream checksum mismatch")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    state = _k.new_state()
    ctxs = _k.new_contexts(_k.CTX_BANK_SIZE)
    _k.dec_init(state, bits)
    out = _k.decode_stream(state, bits, ctxs, count)
    _check(state)
    return out
