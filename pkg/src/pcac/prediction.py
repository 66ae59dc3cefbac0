"""Block-based intra prediction over the kd-tree coding order.

Six modes per block: three referencing the mean color of forward blocks,
two referencing forward macroblocks, and a fixed DC mode. References are
always means of *reconstructed* attributes so the decoder, repeating the
same arithmetic on its own output, lands on bit-identical values.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

MODE_BLOCK_1 = 0   # block j-1
MODE_BLOCK_2 = 1   # block j-2
MODE_BLOCK_3 = 2   # block j-3
MODE_MACRO_1 = 3   # macroblock p-1, p = parent of block j
MODE_MACRO_2 = 4   # macroblock p-2
MODE_DC = 5
N_INTRA_MODES = 6

_DC_REFERENCE = np.array([128.0, 0.0, 0.0])


def dc_reference() -> np.ndarray:
    """Fixed reference: mid-range luma, neutral centered chroma."""
    return _DC_REFERENCE.copy()


def predict(block_yuv: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Per-point residuals against a 3-vector reference mean."""
    return np.asarray(block_yuv, dtype=np.float64) - np.asarray(ref, dtype=np.float64)


def satd(residuals: np.ndarray) -> float:
    """Sum of absolute 1-D DCT coefficients of the summed-component residual.

    The three component residuals of each point are summed into one scalar
    per point; that length-n vector goes through an orthonormal DCT-II.
    """
    r = np.asarray(residuals, dtype=np.float64).sum(axis=1)
    return float(np.abs(scipy.fft.dct(r, type=2, norm="ortho")).sum())


def macroblock_reference(
    mean_a: np.ndarray, size_a: int, mean_b: np.ndarray, size_b: int
) -> np.ndarray:
    """Point-count-weighted mean of a macroblock's two child blocks."""
    total = size_a + size_b
    return (np.asarray(mean_a) * size_a + np.asarray(mean_b) * size_b) / total


def reference_for_mode(
    mode: int, block_index: int, block_means: list, block_sizes: list
) -> np.ndarray:
    """Reference mean for `mode` at 1-based `block_index` of a slice.

    block_means / block_sizes hold the reconstructed means and point counts
    of the blocks already coded (entries 0..block_index-2). Raises KeyError
    when the mode's reference does not exist yet.
    """
    j = block_index
    if mode == MODE_DC:
        return dc_reference()
    if mode in (MODE_BLOCK_1, MODE_BLOCK_2, MODE_BLOCK_3):
        ref = j - 1 - mode  # 1-based index of the referenced block
        if ref < 1:
            raise KeyError(f"mode {mode} unavailable at block {j}")
        return np.asarray(block_means[ref - 1])
    if mode in (MODE_MACRO_1, MODE_MACRO_2):
        parent = (j + 1) // 2
        mb = parent - 1 if mode == MODE_MACRO_1 else parent - 2
        if mb < 1:
            raise KeyError(f"mode {mode} unavailable at block {j}")
        a, b = 2 * mb - 2, 2 * mb - 1  # 0-based child block positions
        return macroblock_reference(
            block_means[a], block_sizes[a], block_means[b], block_sizes[b]
        )
    raise ValueError(f"unknown intra mode {mode}")


def available_modes(block_index: int, use_intra: bool = True) -> list[int]:
    """Intra modes whose references exist for a block; DC is always there."""
    if not use_intra:
        return [MODE_DC]
    modes = []
    j = block_index
    for mode in (MODE_BLOCK_1, MODE_BLOCK_2, MODE_BLOCK_3):
        if j - 1 - mode >= 1:
            modes.append(mode)
    parent = (j + 1) // 2
    if parent - 1 >= 1:
        modes.append(MODE_MACRO_1)
    if parent - 2 >= 1:
        modes.append(MODE_MACRO_2)
    modes.append(MODE_DC)
    return modes


def select_intra_mode(
    block_yuv: np.ndarray,
    block_index: int,
    block_means: list,
    block_sizes: list,
    use_intra: bool = True,
):
    """Pick the available mode with the smallest SATD (ties: smallest id).

    Returns (mode, residuals). The first block of a slice has no forward
    references, so it always codes against the DC reference.
    """
    best_mode, best_res, best_cost = None, None, np.inf
    for mode in sorted(available_modes(block_index, use_intra)):
        ref = reference_for_mode(mode, block_index, block_means, block_sizes)
        res = predict(block_yuv, ref)
        cost = satd(res)
        if cost < best_cost:
            best_mode, best_res, best_cost = mode, res, cost
    return best_mode, best_res
