"""Metrics and experiment harness: PSNR, BD-rate, RD sweeps, ablations.

bpp always comes from the actual bitstream byte length, never from an
estimate, so the numbers here are exactly what a file on disk would cost.
PSNR uses the 255 peak of 8-bit attributes and caps at 100 dB for zero
error. BD-rate is the classic cubic fit of log10(rate) against PSNR,
integrated over the common quality interval.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .codec import EncoderConfig, decode, encode
from .ply_io import PointCloud, rgb_to_yuv

PSNR_CAP_DB = 100.0
_PEAK_SQ = 255.0 ** 2

CSV_COLUMNS = ["Q", "bpp", "psnr_y", "psnr_u", "psnr_v", "encode_ms", "decode_ms"]


@dataclass(frozen=True)
class RDPoint:
    bpp: float
    psnr_y: float
    q: float = float("nan")
    psnr_u: float = float("nan")
    psnr_v: float = float("nan")
    encode_ms: float = float("nan")
    decode_ms: float = float("nan")


@dataclass(frozen=True)
class RDCurve:
    label: str
    points: tuple

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.bpp))
        bpps = [p.bpp for p in pts]
        if any(b1 <= b0 for b0, b1 in zip(bpps, bpps[1:])):
            raise ValueError(f"curve {self.label!r} has non-increasing bpp: {bpps}")
        object.__setattr__(self, "points", pts)

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    @property
    def psnr_y(self) -> np.ndarray:
        return np.array([p.psnr_y for p in self.points])


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))


def mse_to_psnr(mse: float) -> float:
    if mse <= 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(_PEAK_SQ / mse)))


def psnr_to_mse(psnr: float) -> float:
    return _PEAK_SQ / 10.0 ** (psnr / 10.0)


def psnr_y(original: np.ndarray, reconstructed: np.ndarray) -> float:
    """PSNR of the luma column of two (n, 3) YUV matrices, in dB."""
    original = np.asarray(original)
    reconstructed = np.asarray(reconstructed)
    if original.shape != reconstructed.shape:
        raise ValueError(
            f"shape mismatch: {original.shape} vs {reconstructed.shape}"
        )
    return mse_to_psnr(_mse(original[:, 0], reconstructed[:, 0]))


def psnr_component(original: np.ndarray, reconstructed: np.ndarray, comp: int) -> float:
    return mse_to_psnr(_mse(original[:, comp], reconstructed[:, comp]))


def bd_rate(reference: RDCurve, test: RDCurve) -> float:
    """Bjontegaard delta rate of `test` against `reference`, in percent.

    Negative means the test curve needs fewer bits at equal PSNR-Y. Both
    curves need at least 4 points and overlapping PSNR ranges.
    """
    for curve in (reference, test):
        if len(curve.points) < 4:
            raise ValueError(f"curve {curve.label!r} has fewer than 4 points")
    lo = max(reference.psnr_y.min(), test.psnr_y.min())
    hi = min(reference.psnr_y.max(), test.psnr_y.max())
    if hi <= lo:
        raise ValueError("curves have no overlapping PSNR range")
    p_ref = np.polyfit(reference.psnr_y, np.log10(reference.bpp), 3)
    p_test = np.polyfit(test.psnr_y, np.log10(test.bpp), 3)
    int_ref = np.polyint(p_ref)
    int_test = np.polyint(p_test)
    avg_ref = (np.polyval(int_ref, hi) - np.polyval(int_ref, lo)) / (hi - lo)
    avg_test = (np.polyval(int_test, hi) - np.polyval(int_test, lo)) / (hi - lo)
    return float((10.0 ** (avg_test - avg_ref) - 1.0) * 100.0)


def measure_point(cloud: PointCloud, cfg: EncoderConfig) -> RDPoint:
    """Encode + decode once and collect the full RD record."""
    orig_yuv = rgb_to_yuv(cloud.rgb)
    t0 = time.perf_counter()
    result = encode(cloud, cfg)
    t1 = time.perf_counter()
    decoded = decode(result.data, cloud.positions)
    t2 = time.perf_counter()
    return RDPoint(
        bpp=len(result.data) * 8.0 / cloud.count,
        psnr_y=psnr_y(orig_yuv, decoded.yuv),
        q=cfg.q,
        psnr_u=psnr_component(orig_yuv, decoded.yuv, 1),
        psnr_v=psnr_component(orig_yuv, decoded.yuv, 2),
        encode_ms=(t1 - t0) * 1e3,
        decode_ms=(t2 - t1) * 1e3,
    )


def run_rd_sweep(cloud: PointCloud, cfg: EncoderConfig, q_list,
                 csv_path=None, label: str = "sweep", threads: int = 1) -> RDCurve:
    """RD curve over a list of quantization steps; optionally emit CSV."""
    if not q_list:
        raise ValueError("q_list must not be empty")
    configs = [replace(cfg, q=float(q)) for q in q_list]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda c: measure_point(cloud, c), configs))
    else:
        points = [measure_point(cloud, c) for c in configs]
    curve = RDCurve(label=label, points=tuple(points))
    if csv_path is not None:
        write_sweep_csv(csv_path, curve)
    return curve


def write_sweep_csv(path, curve: RDCurve, extra_label: bool = False) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        cols = (["model"] if extra_label else []) + CSV_COLUMNS
        w.writerow(cols)
        for p in curve.points:
            row = ([curve.label] if extra_label else []) + [
                repr(float(v)) for v in (p.q, p.bpp, p.psnr_y, p.psnr_u,
                                         p.psnr_v, p.encode_ms, p.decode_ms)
            ]
            w.writerow(row)


def read_sweep_csv(path) -> RDCurve:
    points = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"CSV {path} lacks columns {sorted(missing)}")
        for row in reader:
            points.append(RDPoint(
                bpp=float(row["bpp"]), psnr_y=float(row["psnr_y"]),
                q=float(row["Q"]), psnr_u=float(row["psnr_u"]),
                psnr_v=float(row["psnr_v"]), encode_ms=float(row["encode_ms"]),
                decode_ms=float(row["decode_ms"]),
            ))
    return RDCurve(label=str(path), points=tuple(points))


def sweep_samples(curve: RDCurve) -> list[tuple[float, float, float]]:
    """(Q, bpp, mean YUV MSE) triples for lambda-model fitting."""
    out = []
    for p in curve.points:
        mse = (psnr_to_mse(p.psnr_y) + psnr_to_mse(p.psnr_u) + psnr_to_mse(p.psnr_v)) / 3.0
        out.append((p.q, p.bpp, mse))
    return out


ABLATION_MODELS = ("V1", "V2", "V3", "V4", "V5")


def run_ablation(cloud: PointCloud, q_list, base_cfg: EncoderConfig = EncoderConfig(),
                 csv_path=None, threads: int = 1):
    """Sweep the five tool combinations; report BD-rate of each against V1.

    Returns (curves, bd_vs_v1): a dict of label -> RDCurve and a dict of
    label -> percent BD-rate relative to the V1 baseline.
    """
    from .codec import ablation_config

    curves = {}
    for model in ABLATION_MODELS:
        curves[model] = run_rd_sweep(
            cloud, ablation_config(model, base_cfg), q_list, label=model,
            threads=threads,
        )
    bd = {m: bd_rate(curves["V1"], curves[m]) for m in ABLATION_MODELS}
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["model"] + CSV_COLUMNS)
            for model in ABLATION_MODELS:
                for p in curves[model].points:
                    w.writerow([model] + [repr(float(v)) for v in
                                          (p.q, p.bpp, p.psnr_y, p.psnr_u,
                                           p.psnr_v, p.encode_ms, p.decode_ms)])
    return curves, bd
