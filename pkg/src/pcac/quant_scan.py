"""Uniform quantization and the seven-mode reordering scan.

A block's n x 3 coefficient matrix is flattened by one of seven bijective
scans; the scan whose output ends in the longest zero run wins, and that
trailing run is simply not transmitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# mode 0 is the point-major raster; modes 1..6 emit whole component columns
# in the six possible component orders (0=Y, 1=U, 2=V)
SCAN_COLUMN_ORDERS = {
    1: (0, 1, 2),
    2: (0, 2, 1),
    3: (1, 0, 2),
    4: (1, 2, 0),
    5: (2, 0, 1),
    6: (2, 1, 0),
}
N_SCAN_MODES = 7


@dataclass(frozen=True)
class QuantizedBlock:
    coeffs: np.ndarray  # (n, 3) int32 levels
    q: float


@dataclass(frozen=True)
class ScannedBlock:
    mode: int
    kept: int
    symbols: np.ndarray  # int32, length == kept


def quantize(coeffs: np.ndarray, q: float) -> QuantizedBlock:
    """Uniform quantization, rounding half away from zero."""
    if q <= 0:
        raise ValueError(f"quantization step must be positive, got {q}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    levels = np.sign(coeffs) * np.floor(np.abs(coeffs) / q + 0.5)
    return QuantizedBlock(coeffs=levels.astype(np.int32), q=q)


def dequantize(block: QuantizedBlock) -> np.ndarray:
    return block.coeffs.astype(np.float64) * block.q


def scan(coeffs: np.ndarray, mode: int) -> np.ndarray:
    """Flatten an (n, 3) integer matrix along one of the seven scan paths."""
    coeffs = np.asarray(coeffs)
    if mode == 0:
        return coeffs.reshape(-1).copy()
    try:
        order = SCAN_COLUMN_ORDERS[mode]
    except KeyError:
        raise ValueError(f"scan mode must be in [0, 6], got {mode}") from None
    return coeffs[:, order].T.reshape(-1).copy()


def inverse_scan(flat: np.ndarray, mode: int, n: int) -> np.ndarray:
    """Invert `scan`; `flat` must hold all 3n entries."""
    flat = np.asarray(flat)
    if flat.shape != (3 * n,):
        raise ValueError(f"expected {3 * n} symbols, got {flat.shape}")
    if mode == 0:
        return flat.reshape(n, 3).copy()
    order = SCAN_COLUMN_ORDERS[mode]
    out = np.empty((n, 3), dtype=flat.dtype)
    for k, comp in enumerate(order):
        out[:, comp] = flat[k * n:(k + 1) * n]
    return out


def _kept_after_truncation(flat: np.ndarray) -> int:
    nz = np.flatnonzero(flat)
    return int(nz[-1]) + 1 if nz.size else 0


def select_scan_mode(coeffs: np.ndarray) -> ScannedBlock:
    """Try all seven scans, keep the one with the most trailing zeros.

    Ties resolve to the smallest mode id, so an all-zero block reports
    mode 0 with nothing kept.
    """
    best_mode, best_kept, best_flat = 0, None, None
    for mode in range(N_SCAN_MODES):
        flat = scan(coeffs, mode)
        kept = _kept_after_truncation(flat)
        if best_kept is None or kept < best_kept:
            best_mode, best_kept, best_flat = mode, kept, flat
    return ScannedBlock(mode=best_mode, kept=best_kept,
                        symbols=best_flat[:best_kept].astype(np.int32))


def scan_without_selection(coeffs: np.ndarray) -> ScannedBlock:
    """Raster scan with trailing-zero truncation (scan selection disabled)."""
    flat = scan(coeffs, 0)
    kept = _kept_after_truncation(flat)
    return ScannedBlock(mode=0, kept=kept, symbols=flat[:kept].astype(np.int32))


def unscan_symbols(symbols: np.ndarray, mode: int, n: int) -> np.ndarray:
    """Rebuild the (n, 3) level matrix from truncated scan symbols."""
    flat = np.zeros(3 * n, dtype=np.int32)
    flat[: len(symbols)] = symbols
    return inverse_scan(flat, mode, n)
