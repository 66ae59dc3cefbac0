"""Command-line front end: encode, decode, sweep, ablate, fit-lambda, info.

Exit codes: 0 success, 2 bad arguments (argparse), 3 I/O failures,
4 malformed/unsupported files, 5 geometry mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bitstream, entropy, evaluation, ply_io, transform
from .codec import EncoderConfig, GeometryMismatchError, decode, encode

EXIT_OK = 0
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_MISMATCH = 5


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("PCAC_THREADS")
    return max(1, int(env)) if env else 1


def _config_from_args(args) -> EncoderConfig:
    return EncoderConfig(
        q=args.q,
        threshold_1=args.t1,
        threshold_2=args.t2,
        depth=args.depth,
        delta=args.delta,
        tau=args.tau,
        lambda_model=transform.LambdaQModel(a=args.lambda_a, b=args.lambda_b),
        use_slices=not args.no_slices,
        use_intra=not args.no_intra,
        use_adaptive_transform=not args.no_adaptive_transform,
        use_scan_select=not args.no_scan_select,
    )


def _add_encoder_options(p: argparse.ArgumentParser, with_q: bool = True):
    if with_q:
        p.add_argument("--q", type=float, default=32.0,
                       help="quantization step (default 32)")
    p.add_argument("--depth", type=int, default=None,
                   help="kd-tree depth override (default: auto for 100-200 point blocks)")
    p.add_argument("--t1", type=float, default=100.0,
                   help="slice split: per-block color variance threshold (default 100)")
    p.add_argument("--t2", type=float, default=0.3,
                   help="slice split: non-smooth block fraction threshold (default 0.3)")
    p.add_argument("--delta", type=float, default=None,
                   help="graph kernel width (default: per-block adaptive)")
    p.add_argument("--tau", type=float, default=None,
                   help="graph edge squared-distance cutoff (default: per-block adaptive)")
    p.add_argument("--lambda-a", type=float, default=0.14,
                   help="lambda-Q model coefficient a (default 0.14)")
    p.add_argument("--lambda-b", type=float, default=1.72,
                   help="lambda-Q model exponent b (default 1.72)")
    p.add_argument("--no-slices", action="store_true", help="disable slice partitioning")
    p.add_argument("--no-intra", action="store_true", help="force DC prediction only")
    p.add_argument("--no-adaptive-transform", action="store_true",
                   help="force DCT (skip the GFT/DCT decision)")
    p.add_argument("--no-scan-select", action="store_true",
                   help="force the raster scan")


def _parse_q_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad Q list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty Q list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcac",
        description="Lossy point cloud color codec (kd-tree blocks, intra "
                    "prediction, adaptive GFT/DCT, arithmetic coding).",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for sweeps (default: $PCAC_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a PLY file's colors")
    p.add_argument("-i", "--input", required=True, help="input .ply")
    p.add_argument("-o", "--output", required=True, help="output .pcac bitstream")
    _add_encoder_options(p)

    p = sub.add_parser("decode", help="reconstruct colors from a bitstream")
    p.add_argument("-i", "--input", required=True, help="input .pcac bitstream")
    p.add_argument("--geometry", required=True,
                   help="side-information PLY providing the point positions")
    p.add_argument("-o", "--output", required=True, help="output .ply")
    p.add_argument("--ascii", action="store_true", help="write ascii PLY")

    p = sub.add_parser("sweep", help="rate-distortion sweep over Q values")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--q", type=_parse_q_list, default=[8.0, 16.0, 32.0, 64.0],
                   help="comma-separated Q list (default 8,16,32,64)")
    p.add_argument("--csv", required=True, help="output CSV path")
    _add_encoder_options(p, with_q=False)

    p = sub.add_parser("ablate", help="sweep the V1..V5 tool combinations")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--q", type=_parse_q_list, default=[8.0, 16.0, 32.0, 64.0])
    p.add_argument("--csv", required=True, help="output CSV path")
    _add_encoder_options(p, with_q=False)

    p = sub.add_parser("fit-lambda", help="fit the lambda-Q model from sweep CSVs")
    p.add_argument("--csv", required=True,
                   help="comma-separated list of sweep CSV files")
    p.add_argument("-o", "--output", required=True, help="output key=value model file")

    p = sub.add_parser("info", help="print a bitstream's header")
    p.add_argument("-i", "--input", required=True)
    return parser


def _cmd_encode(args) -> int:
    cloud = ply_io.load_ply(args.input)
    cfg = _config_from_args(args)
    result = encode(cloud, cfg)
    with open(args.output, "wb") as f:
        f.write(result.data)
    bpp = len(result.data) * 8.0 / cloud.count
    print(f"encoded {cloud.count} points -> {len(result.data)} bytes ({bpp:.3f} bpp)")
    return EXIT_OK


def _cmd_decode(args) -> int:
    with open(args.input, "rb") as f:
        data = f.read()
    geometry = ply_io.load_ply(args.geometry)
    decoded = decode(data, geometry.positions)
    ply_io.save_ply(decoded.cloud, args.output,
                    fmt="ascii" if args.ascii else "binary")
    print(f"decoded {decoded.cloud.count} points -> {args.output}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cloud = ply_io.load_ply(args.input)
    args.q_value = None
    cfg = EncoderConfig(
        threshold_1=args.t1, threshold_2=args.t2, depth=args.depth,
        delta=args.delta, tau=args.tau,
        lambda_model=transform.LambdaQModel(a=args.lambda_a, b=args.lambda_b),
        use_slices=not args.no_slices, use_intra=not args.no_intra,
        use_adaptive_transform=not args.no_adaptive_transform,
        use_scan_select=not args.no_scan_select,
    )
    curve = evaluation.run_rd_sweep(cloud, cfg, args.q, csv_path=args.csv,
                                    threads=_threads(args))
    for p in curve.points:
        print(f"Q={p.q:<8g} bpp={p.bpp:<10.4f} psnr_y={p.psnr_y:.3f} dB")
    print(f"wrote {args.csv}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    cloud = ply_io.load_ply(args.input)
    cfg = EncoderConfig(
        threshold_1=args.t1, threshold_2=args.t2, depth=args.depth,
        delta=args.delta, tau=args.tau,
        lambda_model=transform.LambdaQModel(a=args.lambda_a, b=args.lambda_b),
    )
    curves, bd = evaluation.run_ablation(cloud, args.q, base_cfg=cfg,
                                         csv_path=args.csv, threads=_threads(args))
    for model in evaluation.ABLATION_MODELS:
        print(f"{model}: BD-rate vs V1 = {bd[model]:+.2f}%")
    print(f"wrote {args.csv}")
    return EXIT_OK


def _cmd_fit_lambda(args) -> int:
    qs_all, lams_all = [], []
    for path in args.csv.split(","):
        curve = evaluation.read_sweep_csv(path)
        qs, lams = transform.pair_slopes(evaluation.sweep_samples(curve))
        qs_all.extend(qs)
        lams_all.extend(lams)
    model, r2 = transform.fit_slopes(np.asarray(qs_all), np.asarray(lams_all))
    with open(args.output, "w") as f:
        f.write(f"a={model.a!r}\nb={model.b!r}\nr_square={r2!r}\n")
    print(f"lambda(Q) = {model.a:.6g} * Q^{model.b:.6g}  (R^2 = {r2:.4f})")
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_info(args) -> int:
    with open(args.input, "rb") as f:
        data = f.read()
    header, segments = bitstream.read_bitstream(data)
    print(f"points: {header.point_count}")
    print(f"slices: {header.slice_count}")
    for i, (sl, seg) in enumerate(zip(header.slices, segments)):
        mapped = "identity" if sl.index_map is None else f"{len(sl.index_map)} entries"
        delta = "adaptive" if sl.delta == 0.0 else f"{sl.delta:g}"
        tau = "adaptive" if sl.tau == 0.0 else f"{sl.tau:g}"
        print(f"  slice {i}: depth={sl.depth} blocks={1 << sl.depth} Q={sl.q:g} "
              f"delta={delta} tau={tau} map={mapped} segment={len(seg)} bytes")
    print(f"total: {len(data)} bytes ({len(data) * 8.0 / header.point_count:.3f} bpp)")
    return EXIT_OK


_COMMANDS = {
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "sweep": _cmd_sweep,
    "ablate": _cmd_ablate,
    "fit-lambda": _cmd_fit_lambda,
    "info": _cmd_info,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GeometryMismatchError as exc:
        print(f"error: geometry mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ply_io.PlyDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ply_io.PlyError, bitstream.BitstreamError, entropy.EntropyError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
