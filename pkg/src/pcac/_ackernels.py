"""Numba kernels for the adaptive binary arithmetic coder.

32-bit carry-less coder in the classic low/high + pending-bits formulation.
All arithmetic is int64; ranges stay below 2^32 and count totals below 2^17,
so products never overflow. Bits travel as one uint8 per bit and are packed
to bytes by the caller.

State array layout (int64[5]): low, high, pending (encoder) or code
(decoder), bit position, error flag. The error flag is set instead of
raising so the kernels stay nopython-compilable; callers must check it.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATE_BITS = 32
MASK = (1 << STATE_BITS) - 1
TOP = 1 << (STATE_BITS - 1)
SECOND = TOP >> 1
HALF_MASK = MASK >> 1

MAX_TOTAL = 1 << 16  # context counts are halved once their sum reaches this

ST_LOW, ST_HIGH, ST_AUX, ST_POS, ST_ERR = 0, 1, 2, 3, 4
ERR_OVERFLOW = 1
ERR_BAD_FIELD = 2

# unary-prefix length at which a value escapes to 32 raw bits
ESCAPE_PREFIX = 16
CTX_BANK_SIZE = 16

# context layout used by block records
CTX_INTRA = 0          # 3 fixed bins
CTX_TMODE = 3          # 1 bin
CTX_SCAN = 4           # 3 fixed bins
CTX_KEPT = 7           # 16-bin unary-prefix bank
CTX_COEF = 23          # 3 banks of 16, one per YUV component
N_RECORD_CONTEXTS = CTX_COEF + 3 * CTX_BANK_SIZE

# component emission order of scan modes 1..6 (mode 0 interleaves)
_SCAN_COMP = np.array(
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]],
    dtype=np.int64,
)


def new_state() -> np.ndarray:
    st = np.zeros(5, dtype=np.int64)
    st[ST_HIGH] = MASK
    return st


def new_contexts(n: int) -> np.ndarray:
    return np.ones((n, 2), dtype=np.int64)


@njit(cache=True)
def _emit(st, buf, bit):
    pos = st[ST_POS]
    if pos >= buf.shape[0]:
        st[ST_ERR] = ERR_OVERFLOW
        return
    buf[pos] = bit
    st[ST_POS] = pos + 1


@njit(cache=True)
def _enc_renorm(st, buf):
    low = st[ST_LOW]
    high = st[ST_HIGH]
    while ((low ^ high) & TOP) == 0:
        bit = low >> (STATE_BITS - 1)
        _emit(st, buf, bit)
        opp = bit ^ 1
        for _ in range(st[ST_AUX]):
            _emit(st, buf, opp)
        st[ST_AUX] = 0
        low = (low << 1) & MASK
        high = ((high << 1) & MASK) | 1
    while (low & ~high & SECOND) != 0:
        st[ST_AUX] += 1
        low = (low << 1) & HALF_MASK
        high = ((high << 1) & HALF_MASK) | TOP | 1
    st[ST_LOW] = low
    st[ST_HIGH] = high


@njit(cache=True)
def _enc_split(st, buf, c0, total, bit):
    low = st[ST_LOW]
    high = st[ST_HIGH]
    rng = high - low + 1
    mid = low + rng * c0 // total  # first value of the 1-branch
    if bit == 0:
        st[ST_HIGH] = mid - 1
    else:
        st[ST_LOW] = mid
    _enc_renorm(st, buf)


@njit(cache=True)
def _ctx_update(ctxs, k, bit):
    ctxs[k, bit] += 1
    if ctxs[k, 0] + ctxs[k, 1] >= MAX_TOTAL:
        ctxs[k, 0] = (ctxs[k, 0] + 1) >> 1
        ctxs[k, 1] = (ctxs[k, 1] + 1) >> 1


@njit(cache=True)
def _enc_bit(st, buf, ctxs, k, bit):
    _enc_split(st, buf, ctxs[k, 0], ctxs[k, 0] + ctxs[k, 1], bit)
    _ctx_update(ctxs, k, bit)


@njit(cache=True)
def _enc_bypass(st, buf, bit):
    _enc_split(st, buf, 1, 2, bit)


@njit(cache=True)
def enc_finish(st, buf):
    # one disambiguating bit; any value completing the stream with zeros
    # then lies inside [low, high]
    _emit(st, buf, 1)


@njit(cache=True)
def _dec_read(st, bits):
    pos = st[ST_POS]
    b = 0
    if pos < bits.shape[0]:
        b = bits[pos]
    st[ST_POS] = pos + 1
    return b


@njit(cache=True)
def dec_init(st, bits):
    code = 0
    for _ in range(STATE_BITS):
        code = (code << 1) | _dec_read(st, bits)
    st[ST_AUX] = code


@njit(cache=True)
def _dec_renorm(st, bits):
    low = st[ST_LOW]
    high = st[ST_HIGH]
    code = st[ST_AUX]
    while ((low ^ high) & TOP) == 0:
        code = ((code << 1) & MASK) | _dec_read(st, bits)
        low = (low << 1) & MASK
        high = ((high << 1) & MASK) | 1
    while (low & ~high & SECOND) != 0:
        code = (code & TOP) | ((code << 1) & HALF_MASK) | _dec_read(st, bits)
        low = (low << 1) & HALF_MASK
        high = ((high << 1) & HALF_MASK) | TOP | 1
    st[ST_LOW] = low
    st[ST_HIGH] = high
    st[ST_AUX] = code


@njit(cache=True)
def _dec_split(st, bits, c0, total):
    low = st[ST_LOW]
    high = st[ST_HIGH]
    rng = high - low + 1
    value = ((st[ST_AUX] - low + 1) * total - 1) // rng
    mid = low + rng * c0 // total
    if value >= c0:
        st[ST_LOW] = mid
        bit = 1
    else:
        st[ST_HIGH] = mid - 1
        bit = 0
    _dec_renorm(st, bits)
    return bit


@njit(cache=True)
def _dec_bit(st, bits, ctxs, k):
    bit = _dec_split(st, bits, ctxs[k, 0], ctxs[k, 0] + ctxs[k, 1])
    _ctx_update(ctxs, k, bit)
    return bit


@njit(cache=True)
def _dec_bypass(st, bits):
    return _dec_split(st, bits, 1, 2)


@njit(cache=True)
def _enc_uint(st, buf, ctxs, bank, u):
    """Adaptive Exp-Golomb-0: unary prefix (context per position), bypass
    suffix; prefixes of ESCAPE_PREFIX ones switch to 32 raw bits."""
    v = u + 1
    length = 0
    while (v >> (length + 1)) != 0:
        length += 1
    if length >= ESCAPE_PREFIX:
        for k in range(ESCAPE_PREFIX):
            _enc_bit(st, buf, ctxs, bank + k, 1)
        for k in range(31, -1, -1):
            _enc_bypass(st, buf, (u >> k) & 1)
    else:
        for k in range(length):
            _enc_bit(st, buf, ctxs, bank + k, 1)
        _enc_bit(st, buf, ctxs, bank + length, 0)
        for k in range(length - 1, -1, -1):
            _enc_bypass(st, buf, (v >> k) & 1)


@njit(cache=True)
def _dec_uint(st, bits, ctxs, bank):
    length = 0
    while length < ESCAPE_PREFIX and _dec_bit(st, bits, ctxs, bank + length) == 1:
        length += 1
    if length == ESCAPE_PREFIX:
        u = 0
        for _ in range(32):
            u = (u << 1) | _dec_bypass(st, bits)
        return u
    v = 1
    for _ in range(length):
        v = (v << 1) | _dec_bypass(st, bits)
    return v - 1


@njit(cache=True)
def _fold(v):
    return 2 * v if v >= 0 else -2 * v - 1


@njit(cache=True)
def _unfold(u):
    if (u & 1) == 0:
        return u >> 1
    return -((u + 1) >> 1)


@njit(cache=True)
def _component_at(smode, n, t):
    if smode == 0:
        return t % 3
    return _SCAN_COMP[smode - 1, t // n]


@njit(cache=True)
def encode_payload(st, buf, ctxs, smode, kept, syms, n):
    """Scan mode, kept count, then the kept coefficient symbols."""
    for k in range(3):
        _enc_bit(st, buf, ctxs, CTX_SCAN + k, (smode >> (2 - k)) & 1)
    _enc_uint(st, buf, ctxs, CTX_KEPT, kept)
    for t in range(kept):
        comp = _component_at(smode, n, t)
        _enc_uint(st, buf, ctxs, CTX_COEF + comp * CTX_BANK_SIZE, _fold(syms[t]))


@njit(cache=True)
def encode_record(st, buf, ctxs, imode, tmode, smode, kept, syms, n):
    for k in range(3):
        _enc_bit(st, buf, ctxs, CTX_INTRA + k, (imode >> (2 - k)) & 1)
    _enc_bit(st, buf, ctxs, CTX_TMODE, tmode)
    encode_payload(st, buf, ctxs, smode, kept, syms, n)


@njit(cache=True)
def decode_record(st, bits, ctxs, n):
    imode = 0
    for k in range(3):
        imode = (imode << 1) | _dec_bit(st, bits, ctxs, CTX_INTRA + k)
    tmode = _dec_bit(st, bits, ctxs, CTX_TMODE)
    smode = 0
    for k in range(3):
        smode = (smode << 1) | _dec_bit(st, bits, ctxs, CTX_SCAN + k)
    kept = _dec_uint(st, bits, ctxs, CTX_KEPT)
    if imode > 5 or smode > 6 or kept > 3 * n:
        st[ST_ERR] = ERR_BAD_FIELD
        return imode, tmode, smode, np.empty(0, dtype=np.int64)
    syms = np.empty(kept, dtype=np.int64)
    for t in range(kept):
        comp = _component_at(smode, n, t)
        syms[t] = _unfold(_dec_uint(st, bits, ctxs, CTX_COEF + comp * CTX_BANK_SIZE))
    return imode, tmode, smode, syms


@njit(cache=True)
def encode_stream(st, buf, ctxs, syms):
    """Plain symbol list through one coefficient-style context bank."""
    for t in range(syms.shape[0]):
        _enc_uint(st, buf, ctxs, 0, _fold(syms[t]))


@njit(cache=True)
def decode_stream(st, bits, ctxs, count):
    out = np.empty(count, dtype=np.int64)
    for t in range(count):
        out[t] = _unfold(_dec_uint(st, bits, ctxs, 0))
    return out
