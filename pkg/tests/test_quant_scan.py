import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcac.quant_scan import (
    N_SCAN_MODES,
    dequantize,
    inverse_scan,
    quantize,
    scan,
    scan_without_selection,
    select_scan_mode,
    unscan_symbols,
)


def test_quantize_half_away_from_zero():
    q = quantize(np.array([[10.0, -10.0, 2.0]]), 4.0)
    assert q.coeffs.tolist() == [[3, -3, 1]]  # 2.5 rounds away from zero
    np.testing.assert_array_equal(dequantize(q), [[12.0, -12.0, 4.0]])


def test_quantize_unit_step_is_lossless_on_integers(rng):
    ints = rng.integers(-500, 500, (40, 3)).astype(np.float64)
    q = quantize(ints, 1.0)
    np.testing.assert_array_equal(q.coeffs, ints.astype(np.int32))
    np.testing.assert_array_equal(dequantize(q), ints)


def test_quantize_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        quantize(np.zeros((1, 3)), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 100.0))
def test_quantize_error_bound(seed, q):
    x = np.random.default_rng(seed).normal(size=(20, 3)) * 100
    err = np.abs(dequantize(quantize(x, q)) - x)
    assert err.max() <= q / 2 + 1e-9


def test_scan_mode0_raster():
    coeffs = np.array([[1, 2, 3], [4, 5, 6]])
    assert scan(coeffs, 0).tolist() == [1, 2, 3, 4, 5, 6]


def test_scan_mode1_column_major():
    coeffs = np.array([[1, 2, 3], [4, 5, 6]])
    assert scan(coeffs, 1).tolist() == [1, 4, 2, 5, 3, 6]


def test_scan_modes_are_the_six_component_orders():
    coeffs = np.array([[10, 20, 30]])
    expected = {1: [10, 20, 30], 2: [10, 30, 20], 3: [20, 10, 30],
                4: [20, 30, 10], 5: [30, 10, 20], 6: [30, 20, 10]}
    for mode, flat in expected.items():
        assert scan(coeffs, mode).tolist() == flat


def test_scan_bad_mode():
    with pytest.raises(ValueError):
        scan(np.zeros((2, 3), dtype=np.int32), 7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 50), st.integers(0, 6))
def test_scan_is_a_bijection(seed, n, mode):
    coeffs = np.random.default_rng(seed).integers(-9, 10, (n, 3))
    flat = scan(coeffs, mode)
    assert flat.shape == (3 * n,)
    assert sorted(flat.tolist()) == sorted(coeffs.reshape(-1).tolist())
    np.testing.assert_array_equal(inverse_scan(flat, mode, n), coeffs)


def test_select_all_zero():
    out = select_scan_mode(np.zeros((9, 3), dtype=np.int32))
    assert out.mode == 0 and out.kept == 0 and out.symbols.size == 0


def test_select_zero_v_column_prefers_v_last(rng):
    n = 12
    coeffs = rng.integers(1, 5, (n, 3)).astype(np.int32)
    coeffs[:, 2] = 0  # V column entirely zero
    out = select_scan_mode(coeffs)
    trailing = 3 * n - out.kept
    assert trailing >= n
    assert out.mode in (1, 3)  # the component orders ending in the V column


def test_selection_maximizes_trailing_zeros(rng):
    for _ in range(300):
        n = int(rng.integers(1, 30))
        coeffs = rng.integers(-3, 4, (n, 3)).astype(np.int32)
        # sprinkle extra zeros so trailing runs differ between modes
        mask = rng.random((n, 3)) < 0.5
        coeffs[mask] = 0
        out = select_scan_mode(coeffs)
        runs = {}
        for mode in range(N_SCAN_MODES):
            flat = scan(coeffs, mode)
            nz = np.flatnonzero(flat)
            runs[mode] = 3 * n - (int(nz[-1]) + 1 if nz.size else 0)
        best = max(runs.values())
        assert 3 * n - out.kept == best
        assert out.mode == min(m for m, r in runs.items() if r == best)
        np.testing.assert_array_equal(unscan_symbols(out.symbols, out.mode, n), coeffs)


def test_truncation_losslessness(rng):
    coeffs = rng.integers(-2, 3, (15, 3)).astype(np.int32)
    out = select_scan_mode(coeffs)
    padded = np.zeros(45, dtype=np.int32)
    padded[:out.kept] = out.symbols
    np.testing.assert_array_equal(inverse_scan(padded, out.mode, 15), coeffs)


def test_scan_without_selection_is_mode0(rng):
    coeffs = rng.integers(-2, 3, (8, 3)).astype(np.int32)
    out = scan_without_selection(coeffs)
    assert out.mode == 0
    np.testing.assert_array_equal(unscan_symbols(out.symbols, 0, 8), coeffs)
