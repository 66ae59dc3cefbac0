"""Encode/decode pipelines with a bit-exact closed reconstruction loop.

The encoder keeps a running reconstruction (what the decoder will see) and
predicts every block from it, never from the original colors. The decoder
repeats the identical arithmetic, so both sides hold the same YUV doubles
bit for bit; tests assert that equality rather than a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import entropy, prediction, quant_scan, transform
from .bitstream import BitstreamHeader, SliceHeader, read_bitstream, write_bitstream
from .entropy import TRANSFORM_DCT, BlockRecord, DecodeError, SegmentDecoder, SegmentEncoder
from .partition import (
    Slice,
    build_kdtree,
    choose_depth,
    partition_slices,
)
from .ply_io import PointCloud, rgb_to_yuv, yuv_to_rgb


class GeometryMismatchError(ValueError):
    """Side-information geometry does not match the stream header."""


@dataclass(frozen=True)
class EncoderConfig:
    """All encoder knobs; the `use_*` toggles exist for ablation studies.

    Disabling adaptive_transform forces DCT, disabling intra forces DC-only
    prediction, disabling scan_select forces the raster scan, disabling
    slices keeps the frame in a single slice.
    """

    q: float = 32.0
    threshold_1: float = 100.0
    threshold_2: float = 0.3
    depth: int | None = None
    delta: float | None = None
    tau: float | None = None
    lambda_model: transform.LambdaQModel = field(default_factory=transform.LambdaQModel)
    use_slices: bool = True
    use_intra: bool = True
    use_adaptive_transform: bool = True
    use_scan_select: bool = True

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError(f"quantization step must be positive, got {self.q}")
        if self.depth is not None and self.depth < 0:
            raise ValueError(f"kd-tree depth must be >= 0, got {self.depth}")


@dataclass(frozen=True)
class DecodedCloud:
    cloud: PointCloud
    yuv: np.ndarray  # reconstructed YUV before RGB rounding


@dataclass(frozen=True)
class BlockTrace:
    """Per-block encoder decisions, kept only when tracing is requested."""

    slice_id: int
    block_index: int
    positions: np.ndarray
    residuals: np.ndarray
    intra_mode: int
    coder_before: entropy.CoderState | None
    decision: transform.TransformDecision
    q: float
    lam: float
    delta: float | None
    tau: float | None


@dataclass(frozen=True)
class EncodeResult:
    data: bytes
    reconstruction: DecodedCloud
    header: BitstreamHeader
    trace: list | None = None


def _wire_f32(value: float | None) -> float:
    """Round to the f32 the header stores, so encode and decode agree."""
    return 0.0 if value is None else float(np.float32(value))


def _slice_leaves(positions: np.ndarray, indices: np.ndarray, depth: int):
    tree = build_kdtree(Slice(0, indices), positions, depth)
    return tree.leaves


def _encode_slice(slice_id, positions, yuv, leaves, q, lam, delta, tau, cfg,
                  recon, trace):
    enc = SegmentEncoder()
    means: list[np.ndarray] = []
    sizes: list[int] = []
    for j, idx in enumerate(leaves, start=1):
        n = idx.shape[0]
        imode, res = prediction.select_intra_mode(
            yuv[idx], j, means, sizes, cfg.use_intra
        )
        want_snapshot = cfg.use_adaptive_transform or trace is not None
        snapshot = enc.snapshot() if want_snapshot else None
        if cfg.use_adaptive_transform:
            basis = transform.block_basis(positions[idx], delta, tau)
            decision = transform.select_transform_mode(
                res, basis, q, lam, snapshot, cfg.use_scan_select
            )
        else:
            decision = transform.forced_transform(
                TRANSFORM_DCT, res, None, q, cfg.use_scan_select
            )
        record = BlockRecord(
            intra_mode=imode,
            transform_mode=decision.mode,
            scan_mode=decision.scanned.mode,
            kept=decision.scanned.kept,
            symbols=decision.scanned.symbols,
        )
        enc.encode_record(record, n)
        ref = prediction.reference_for_mode(imode, j, means, sizes)
        block_yuv = ref + decision.reconstructed
        recon[idx] = block_yuv
        means.append(block_yuv.mean(axis=0))
        sizes.append(n)
        if trace is not None:
            trace.append(BlockTrace(
                slice_id=slice_id, block_index=j,
                positions=positions[idx].copy(), residuals=res.copy(),
                intra_mode=imode, coder_before=snapshot, decision=decision,
                q=q, lam=lam, delta=delta, tau=tau,
            ))
    return enc.finish()


def encode(cloud: PointCloud, cfg: EncoderConfig = EncoderConfig(),
           collect_trace: bool = False) -> EncodeResult:
    """Compress a frame's colors; geometry is assumed transmitted elsewhere.

    Returns the bitstream together with the encoder-side reconstruction,
    which the decoder must reproduce exactly.
    """
    if cloud.count == 0:
        raise ValueError("cannot encode an empty cloud")
    yuv = rgb_to_yuv(cloud.rgb)
    q = _wire_f32(cfg.q)
    if q <= 0:
        raise ValueError(f"quantization step underflows the header f32: {cfg.q}")
    lam = cfg.lambda_model.a * q ** cfg.lambda_model.b
    delta = None if cfg.delta is None else _wire_f32(cfg.delta)
    tau = None if cfg.tau is None else _wire_f32(cfg.tau)

    if cfg.use_slices:
        slices = partition_slices(cloud, cfg.threshold_1, cfg.threshold_2,
                                  choose_depth(cloud.count), yuv=yuv)
    else:
        slices = [Slice(0, np.arange(cloud.count, dtype=np.int64))]

    recon = np.empty_like(yuv)
    trace: list | None = [] if collect_trace else None
    slice_headers = []
    segments = []
    for sl in slices:
        depth = cfg.depth if cfg.depth is not None else choose_depth(sl.count)
        leaves = _slice_leaves(cloud.positions, sl.point_indices, depth)
        segments.append(_encode_slice(
            sl.slice_id, cloud.positions, yuv, leaves, q, lam, delta, tau,
            cfg, recon, trace,
        ))
        identity = len(slices) == 1 and sl.count == cloud.count
        slice_headers.append(SliceHeader(
            depth=depth, q=q,
            delta=0.0 if delta is None else delta,
            tau=0.0 if tau is None else tau,
            index_map=None if identity else sl.point_indices,
        ))

    header = BitstreamHeader(point_count=cloud.count, slices=slice_headers)
    data = write_bitstream(header, segments)
    recon_cloud = PointCloud(cloud.positions, yuv_to_rgb(recon))
    return EncodeResult(data=data, reconstruction=DecodedCloud(recon_cloud, recon),
                        header=header, trace=trace)


def _decode_slice(positions, leaves, q, delta, tau, segment, recon):
    dec = SegmentDecoder(segment)
    means: list[np.ndarray] = []
    sizes: list[int] = []
    for j, idx in enumerate(leaves, start=1):
        n = idx.shape[0]
        record = dec.decode_record(n)
        levels = quant_scan.unscan_symbols(record.symbols, record.scan_mode, n)
        deq = quant_scan.dequantize(quant_scan.QuantizedBlock(levels, q))
        if record.transform_mode == entropy.TRANSFORM_GFT:
            basis = transform.block_basis(positions[idx], delta, tau)
            rec_res = transform.gft_inverse(basis, deq)
        else:
            rec_res = transform.dct_inverse(deq)
        try:
            ref = prediction.reference_for_mode(record.intra_mode, j, means, sizes)
        except KeyError as exc:
            raise DecodeError(f"block {j} signals unavailable intra mode "
                              f"{record.intra_mode}") from exc
        block_yuv = ref + rec_res
        recon[idx] = block_yuv
        means.append(block_yuv.mean(axis=0))
        sizes.append(n)


def decode(data: bytes, positions: np.ndarray) -> DecodedCloud:
    """Rebuild colors from a bitstream and the side-information geometry."""
    header, segments = read_bitstream(data)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise GeometryMismatchError(f"geometry must be (n, 3), got {positions.shape}")
    if positions.shape[0] != header.point_count:
        raise GeometryMismatchError(
            f"stream codes {header.point_count} points, geometry has "
            f"{positions.shape[0]}"
        )
    recon = np.empty((header.point_count, 3), dtype=np.float64)
    covered = np.zeros(header.point_count, dtype=bool)
    for sl, segment in zip(header.slices, segments):
        if sl.index_map is None:
            indices = np.arange(header.point_count, dtype=np.int64)
        else:
            indices = sl.index_map
            if indices.size and indices.max() >= header.point_count:
                raise DecodeError("slice index map points outside the frame")
        if covered[indices].any():
            raise DecodeError("slice index maps overlap")
        covered[indices] = True
        delta = None if sl.delta == 0.0 else sl.delta
        tau = None if sl.tau == 0.0 else sl.tau
        leaves = _slice_leaves(positions, indices, sl.depth)
        _decode_slice(positions, leaves, sl.q, delta, tau, segment, recon)
    if not covered.all():
        raise DecodeError("slices do not cover every point")
    cloud = PointCloud(positions, yuv_to_rgb(recon))
    return DecodedCloud(cloud, recon)


def ablation_config(model: str, base: EncoderConfig = EncoderConfig()) -> EncoderConfig:
    """Tool combinations V1..V5: from bare kd-tree+DCT up to the full codec."""
    toggles = {
        "V1": dict(use_slices=False, use_intra=False, use_adaptive_transform=False,
                   use_scan_select=False),
        "V2": dict(use_slices=False, use_intra=False, use_adaptive_transform=True,
                   use_scan_select=False),
        "V3": dict(use_slices=False, use_intra=True, use_adaptive_transform=True,
                   use_scan_select=False),
        "V4": dict(use_slices=True, use_intra=True, use_adaptive_transform=True,
                   use_scan_select=False),
        "V5": dict(use_slices=True, use_intra=True, use_adaptive_transform=True,
                   use_scan_select=True),
    }
    if model not in toggles:
        raise ValueError(f"unknown ablation model {model!r}")
    return replace(base, **toggles[model])
