import numpy as np
import pytest

from pcac import (
    EncoderConfig,
    GeometryMismatchError,
    PointCloud,
    ablation_config,
    decode,
    encode,
    rgb_to_yuv,
)
from pcac.bitstream import BitstreamError
from pcac.entropy import TRANSFORM_DCT, EntropyError
from pcac.partition import ConfigError

from conftest import make_random_cloud, make_two_region_cloud


def _closed_loop(cloud, cfg):
    result = encode(cloud, cfg)
    decoded = decode(result.data, cloud.positions)
    assert np.array_equal(decoded.yuv, result.reconstruction.yuv)
    assert decoded.cloud == result.reconstruction.cloud
    return result, decoded


def test_closed_loop_small_cloud(rng):
    cloud = make_random_cloud(rng, 700)
    for q in (8.0, 32.0):
        _closed_loop(cloud, EncoderConfig(q=q))


def test_closed_loop_two_slices(two_region_cloud):
    result, _ = _closed_loop(two_region_cloud, EncoderConfig(q=16))
    assert result.header.slice_count == 2
    assert all(sl.index_map is not None for sl in result.header.slices)


def test_closed_loop_all_toggle_combinations(rng):
    cloud = make_random_cloud(rng, 600)
    for model in ("V1", "V2", "V3", "V4", "V5"):
        _closed_loop(cloud, ablation_config(model, EncoderConfig(q=24)))


def test_closed_loop_tiny_clouds(rng):
    for n in (1, 2, 3, 7, 150, 199, 200, 201):
        cloud = make_random_cloud(rng, n)
        _closed_loop(cloud, EncoderConfig(q=16))


def test_closed_loop_duplicate_positions(rng):
    # coincident points exercise the degenerate graph parameters
    positions = np.repeat(rng.uniform(0, 10, (40, 3)), 8, axis=0)
    cloud = PointCloud(positions, rng.integers(0, 256, (320, 3), dtype=np.uint8))
    _closed_loop(cloud, EncoderConfig(q=8))


def test_closed_loop_fractional_q(rng):
    # Q that is not float32-exact must still agree between encode and decode
    cloud = make_random_cloud(rng, 500)
    _closed_loop(cloud, EncoderConfig(q=0.1))
    _closed_loop(cloud, EncoderConfig(q=7.3))


def test_uniform_midgray_cloud_codes_to_zero_residuals(rng):
    n = 900
    cloud = PointCloud(rng.uniform(0, 50, (n, 3)),
                       np.full((n, 3), 128, dtype=np.uint8))
    result = encode(cloud, EncoderConfig(q=8), collect_trace=True)
    decoded = decode(result.data, cloud.positions)
    assert np.array_equal(decoded.cloud.rgb, cloud.rgb)  # exact colors back
    for entry in result.trace:
        assert entry.decision.scanned.kept == 0
    # rate is header plus mode signaling only
    assert len(result.data) * 8.0 / n < 1.0


def test_uniform_color_reconstructs_exactly(rng):
    """Only the first block carries a nonzero residual (DC reference is
    mid-gray); its quantization error is at most Q/(2*sqrt(block size)) per
    component, so a small Q recovers the exact colors after rounding."""
    n = 500
    cloud = PointCloud(rng.uniform(0, 50, (n, 3)),
                       np.full((n, 3), (200, 30, 90), dtype=np.uint8))
    result = encode(cloud, EncoderConfig(q=2))
    decoded = decode(result.data, cloud.positions)
    assert np.array_equal(decoded.cloud.rgb, cloud.rgb)

    # at coarse Q the YUV error still respects the quantizer's error bound
    coarse = encode(cloud, EncoderConfig(q=8))
    err = np.abs(coarse.reconstruction.yuv - rgb_to_yuv(cloud.rgb)).max()
    assert err <= 8.0 / 2.0


def test_bpp_monotone_in_q(textured_cloud):
    sizes = []
    for q in (8, 16, 32, 64):
        result = encode(textured_cloud, EncoderConfig(q=q))
        sizes.append(len(result.data))
    assert sizes == sorted(sizes, reverse=True)
    assert len(set(sizes)) == len(sizes)


def test_encoder_reconstruction_closes_the_loop_not_the_original(textured_cloud):
    """Lossy coding: reconstruction differs from the source but matches the
    decoder; references must come from the reconstruction."""
    orig_yuv = rgb_to_yuv(textured_cloud.rgb)
    result = encode(textured_cloud, EncoderConfig(q=64))
    assert not np.array_equal(result.reconstruction.yuv, orig_yuv)
    decoded = decode(result.data, textured_cloud.positions)
    assert np.array_equal(decoded.yuv, result.reconstruction.yuv)


def test_v1_baseline_forces_dct_everywhere(rng):
    cloud = make_random_cloud(rng, 800)
    cfg = ablation_config("V1", EncoderConfig(q=16))
    result = encode(cloud, cfg, collect_trace=True)
    assert result.header.slice_count == 1
    for entry in result.trace:
        assert entry.decision.mode == TRANSFORM_DCT
        assert entry.intra_mode == 5
        assert entry.decision.scanned.mode == 0


def test_toggles_change_the_bitstream(textured_cloud, two_region_cloud):
    base = encode(textured_cloud, EncoderConfig(q=16)).data
    for field in ("use_intra", "use_adaptive_transform", "use_scan_select"):
        cfg = EncoderConfig(q=16, **{field: False})
        other = encode(textured_cloud, cfg).data
        assert other != base, field
    # the slice toggle only matters on a cloud that actually splits
    split = encode(two_region_cloud, EncoderConfig(q=16)).data
    unsplit = encode(two_region_cloud, EncoderConfig(q=16, use_slices=False)).data
    assert split != unsplit


def test_decode_wrong_geometry_count(rng):
    cloud = make_random_cloud(rng, 300)
    result = encode(cloud, EncoderConfig(q=16))
    with pytest.raises(GeometryMismatchError, match="300"):
        decode(result.data, cloud.positions[:-1])


def test_decode_different_geometry_same_count_changes_output(rng):
    cloud = make_random_cloud(rng, 400)
    result = encode(cloud, EncoderConfig(q=16))
    other_positions = rng.uniform(0, 64, (400, 3))
    # geometry is side information: the wrong geometry yields wrong colors
    decoded = decode(result.data, other_positions)
    assert not np.array_equal(decoded.yuv, result.reconstruction.yuv)


def test_decode_tampered_body_raises(rng):
    cloud = make_random_cloud(rng, 300)
    result = encode(cloud, EncoderConfig(q=16))
    data = bytearray(result.data)
    data[-10] ^= 0x20  # inside the last segment
    with pytest.raises((EntropyError, BitstreamError)):
        decode(bytes(data), cloud.positions)


def test_decode_tampered_header_raises(rng):
    cloud = make_random_cloud(rng, 300)
    result = encode(cloud, EncoderConfig(q=16))
    data = bytearray(result.data)
    data[6] ^= 0x01  # inside point_count
    with pytest.raises(BitstreamError):
        decode(bytes(data), cloud.positions)


def test_encode_rejects_empty_cloud():
    empty = PointCloud(np.empty((0, 3)), np.empty((0, 3), dtype=np.uint8))
    with pytest.raises(ValueError, match="empty"):
        encode(empty)


def test_depth_override(rng):
    cloud = make_random_cloud(rng, 1000)
    result = encode(cloud, EncoderConfig(q=16, depth=2))
    assert result.header.slices[0].depth == 2
    with pytest.raises(ConfigError):
        encode(cloud, EncoderConfig(q=16, depth=12))


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(q=0.0)
    with pytest.raises(ValueError):
        EncoderConfig(depth=-1)


def test_delta_tau_overrides_round_trip(rng):
    cloud = make_random_cloud(rng, 400)
    cfg = EncoderConfig(q=16, delta=2.5, tau=40.0)
    result, _ = _closed_loop(cloud, cfg)
    sl = result.header.slices[0]
    assert sl.delta == pytest.approx(2.5)
    assert sl.tau == pytest.approx(40.0)


def test_trace_covers_every_block(rng):
    cloud = make_random_cloud(rng, 1000)
    result = encode(cloud, EncoderConfig(q=16), collect_trace=True)
    blocks = sum(1 << sl.depth for sl in result.header.slices)
    assert len(result.trace) == blocks
    counted = sum(entry.positions.shape[0] for entry in result.trace)
    assert counted == cloud.count
