"""Lossy point cloud color codec with an RD evaluation harness."""

from .bitstream import BitstreamHeader, read_bitstream, write_bitstream
from .codec import (
    DecodedCloud,
    EncodeResult,
    EncoderConfig,
    GeometryMismatchError,
    ablation_config,
    decode,
    encode,
)
from .entropy import BlockRecord, ac_decode, ac_encode
from .evaluation import RDCurve, RDPoint, bd_rate, psnr_y, run_ablation, run_rd_sweep
from .partition import build_kdtree, choose_depth, enumerate_blocks, partition_slices
from .ply_io import PointCloud, load_ply, rgb_to_yuv, save_ply, yuv_to_rgb
from .transform import LambdaQModel, fit_lambda_q, lambda_from_q

__version__ = "0.1.0"

__all__ = [
    "BitstreamHeader", "BlockRecord", "DecodedCloud", "EncodeResult",
    "EncoderConfig", "GeometryMismatchError", "LambdaQModel", "PointCloud",
    "RDCurve", "RDPoint", "__version__", "ablation_config", "ac_decode",
    "ac_encode", "bd_rate", "build_kdtree", "choose_depth", "decode", "encode",
    "enumerate_blocks", "fit_lambda_q", "lambda_from_q", "load_ply",
    "partition_slices", "psnr_y", "read_bitstream", "rgb_to_yuv",
    "run_ablation", "run_rd_sweep", "save_ply", "write_bitstream", "yuv_to_rgb",
]
