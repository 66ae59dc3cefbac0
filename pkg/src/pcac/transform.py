"""Adaptive transform: per-block graph Fourier basis, 1-D DCT, and the
Lagrangian decision between them.

The decoder rebuilds every GFT basis from decoded geometry, so basis
construction has to be a pure function of (positions, delta, tau): fixed
eigenvalue order, fixed sign convention, fixed tie-breaking. Bases are
memoized on the exact position bytes, which also guarantees encoder and
decoder share literally the same matrix within a process.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import entropy, quant_scan
from .entropy import TRANSFORM_DCT, TRANSFORM_GFT, CoderState

_EIG_TIE_TOL = 1e-10
_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class BlockGraph:
    positions: np.ndarray
    weights: np.ndarray   # symmetric adjacency, zero diagonal
    degrees: np.ndarray   # diagonal degree matrix
    laplacian: np.ndarray


@dataclass(frozen=True)
class GftBasis:
    matrix: np.ndarray       # columns are eigenvectors, ascending eigenvalue
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class LambdaQModel:
    a: float = 0.14
    b: float = 1.72

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"model coefficient a must be positive, got {self.a}")


@dataclass(frozen=True)
class TransformDecision:
    mode: int                    # TRANSFORM_GFT or TRANSFORM_DCT
    quantized: quant_scan.QuantizedBlock
    scanned: quant_scan.ScannedBlock
    reconstructed: np.ndarray    # residuals after the full round trip
    distortion: float
    rate_bpp: float
    cost: float
    candidate_costs: tuple       # (J_gft, J_dct)


def default_graph_params(positions: np.ndarray) -> tuple[float, float]:
    """Scale-adaptive (delta, tau) for a block's geometry.

    delta^2 is the mean squared pairwise distance; tau is three times the
    median squared nearest-neighbor distance (nonzero neighbors only).
    Degenerate blocks (single point, all points coincident) fall back to 1.
    """
    pos = np.asarray(positions, dtype=np.float64)
    n = pos.shape[0]
    if n < 2:
        return 1.0, 1.0
    d2 = _pairwise_sq_dists(pos)
    iu = np.triu_indices(n, k=1)
    mean_sq = float(d2[iu].mean())
    delta = float(np.sqrt(mean_sq)) if mean_sq > 0 else 1.0
    d2_off = d2.copy()
    d2_off[d2_off == 0] = np.inf
    nn = d2_off.min(axis=1)
    finite = nn[np.isfinite(nn)]
    tau = 3.0 * float(np.median(finite)) if finite.size else 1.0
    if tau <= 0:
        tau = 1.0
    return delta, tau


def _pairwise_sq_dists(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def build_graph(positions: np.ndarray, delta: float, tau: float) -> BlockGraph:
    """Gaussian-weighted, distance-thresholded graph over block points.

    w_ij = exp(-d_ij^2 / delta^2) when d_ij^2 <= tau, else 0; L = D - W.
    Disconnected graphs are allowed and left to the mode decision.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if delta <= 0 or tau <= 0:
        raise ValueError("delta and tau must be positive")
    d2 = _pairwise_sq_dists(pos)
    w = np.where(d2 <= tau, np.exp(-d2 / (delta * delta)), 0.0)
    np.fill_diagonal(w, 0.0)
    deg = np.diag(w.sum(axis=1))
    return BlockGraph(positions=pos, weights=w, degrees=deg, laplacian=deg - w)


def _normalize_columns(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its first entry above the tolerance is positive."""
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > _SIGN_TOL)
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    return vecs


def gft_basis(graph: BlockGraph) -> GftBasis:
    """Eigendecomposition of the Laplacian with a canonical column order.

    Eigenvalues ascend; negatives from roundoff clamp to zero. Within an
    eigenvalue tie (1e-10) columns sort in descending lexicographic order of
    their sign-normalized entries, which maps the all-isolated case L = 0 to
    the identity basis.
    """
    lam, vecs = np.linalg.eigh(graph.laplacian)
    lam = np.where(lam < 0, 0.0, lam)
    vecs = _normalize_columns(vecs)
    # canonical order inside tie groups
    start = 0
    n = lam.shape[0]
    while start < n:
        stop = start + 1
        while stop < n and lam[stop] - lam[stop - 1] <= _EIG_TIE_TOL:
            stop += 1
        if stop - start > 1:
            group = sorted(range(start, stop), key=lambda j: tuple(vecs[:, j]),
                           reverse=True)
            vecs[:, start:stop] = vecs[:, group]
            lam[start:stop] = lam[group]
        start = stop
    vecs.flags.writeable = False
    lam.flags.writeable = False
    return GftBasis(matrix=vecs, eigenvalues=lam)


class _BasisCache:
    """Small LRU over (position bytes, delta, tau) -> GftBasis.

    Encode and decode of the same frame hit identical geometry once per
    block per run, and RD sweeps revisit it per Q; memoizing removes the
    repeated eigendecompositions and—within a process—makes enc/dec bases
    the same array."""

    def __init__(self, maxsize: int = 512):
        self._store: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, positions: np.ndarray, delta: float | None,
            tau: float | None) -> GftBasis:
        pos = np.ascontiguousarray(positions, dtype=np.float64)
        # None (adaptive) is part of the key so the derived parameters are
        # only recomputed on a miss
        key = (hashlib.sha1(pos.tobytes()).digest(), delta, tau)
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                return self._store[key]
        if delta is None or tau is None:
            d_def, t_def = default_graph_params(pos)
            delta = d_def if delta is None else delta
            tau = t_def if tau is None else tau
        basis = gft_basis(build_graph(pos, delta, tau))
        with self._lock:
            self._store[key] = basis
            if len(self._store) > self.maxsize:
                self._store.popitem(last=False)
        return basis


_cache = _BasisCache()


def block_basis(positions: np.ndarray, delta: float | None = None,
                tau: float | None = None) -> GftBasis:
    """Memoized GFT basis; None parameters use the scale-adaptive defaults."""
    return _cache.get(positions, delta, tau)


def gft_forward(basis: GftBasis, res: np.ndarray) -> np.ndarray:
    res = np.asarray(res, dtype=np.float64)
    if res.shape[0] != basis.matrix.shape[0]:
        raise ValueError(
            f"basis is {basis.matrix.shape[0]}-dim, residuals have {res.shape[0]} rows"
        )
    return basis.matrix.T @ res


def gft_inverse(basis: GftBasis, coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] != basis.matrix.shape[0]:
        raise ValueError(
            f"basis is {basis.matrix.shape[0]}-dim, coeffs have {coeffs.shape[0]} rows"
        )
    return basis.matrix @ coeffs


def dct_forward(res: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II down each component column, in block point order."""
    return scipy.fft.dct(np.asarray(res, dtype=np.float64), type=2, norm="ortho",
                         axis=0)


def dct_inverse(coeffs: np.ndarray) -> np.ndarray:
    return scipy.fft.idct(np.asarray(coeffs, dtype=np.float64), type=2, norm="ortho",
                          axis=0)


def lambda_from_q(q: float, model: LambdaQModel = LambdaQModel()) -> float:
    """Lagrange multiplier for a quantization step: a * Q^b."""
    if q < 1:
        raise ValueError(f"Q must be >= 1 for the lambda model, got {q}")
    return model.a * q ** model.b


def _roundtrip(mode: int, res: np.ndarray, basis: GftBasis | None, q: float,
               scan_select: bool):
    if mode == TRANSFORM_GFT:
        coeffs = gft_forward(basis, res)
    else:
        coeffs = dct_forward(res)
    quantized = quant_scan.quantize(coeffs, q)
    if scan_select:
        scanned = quant_scan.select_scan_mode(quantized.coeffs)
    else:
        scanned = quant_scan.scan_without_selection(quantized.coeffs)
    deq = quant_scan.dequantize(quantized)
    rec = gft_inverse(basis, deq) if mode == TRANSFORM_GFT else dct_inverse(deq)
    return quantized, scanned, rec


def measure_candidate(mode: int, res: np.ndarray, basis: GftBasis | None,
                      q: float, lam: float, coder: CoderState,
                      scan_select: bool = True):
    """Rate-distortion cost of coding `res` with one transform mode.

    Rate is measured by actually entropy-coding the candidate payload from
    the supplied coder snapshot, plus one bit for transform-mode signaling,
    expressed in bits per point. Distortion is the MSE between the residuals
    and their reconstruction. Returns (J, distortion, rate_bpp, quantized,
    scanned, reconstructed).
    """
    res = np.asarray(res, dtype=np.float64)
    n = res.shape[0]
    quantized, scanned, rec = _roundtrip(mode, res, basis, q, scan_select)
    bits = entropy.payload_bits(coder, scanned.mode, scanned.kept,
                                scanned.symbols, n) + 1.0
    rate = bits / n
    dist = float(np.mean((res - rec) ** 2))
    return dist + lam * rate, dist, rate, quantized, scanned, rec


def select_transform_mode(res: np.ndarray, basis: GftBasis, q: float, lam: float,
                          coder: CoderState, scan_select: bool = True,
                          ) -> TransformDecision:
    """Pick GFT or DCT by minimal J = D + lambda * R; ties go to DCT.

    Both candidates run the full transform -> quantize -> scan -> entropy
    pipeline against the same coder snapshot so their rates are comparable.
    """
    j_gft, d_gft, r_gft, qb_gft, sc_gft, rec_gft = measure_candidate(
        TRANSFORM_GFT, res, basis, q, lam, coder, scan_select
    )
    j_dct, d_dct, r_dct, qb_dct, sc_dct, rec_dct = measure_candidate(
        TRANSFORM_DCT, res, None, q, lam, coder, scan_select
    )
    if j_gft < j_dct:
        return TransformDecision(TRANSFORM_GFT, qb_gft, sc_gft, rec_gft,
                                 d_gft, r_gft, j_gft, (j_gft, j_dct))
    return TransformDecision(TRANSFORM_DCT, qb_dct, sc_dct, rec_dct,
                             d_dct, r_dct, j_dct, (j_gft, j_dct))


def forced_transform(mode: int, res: np.ndarray, basis: GftBasis | None, q: float,
                     scan_select: bool = True) -> TransformDecision:
    """Single-transform path used when the adaptive decision is disabled."""
    quantized, scanned, rec = _roundtrip(mode, np.asarray(res, dtype=np.float64),
                                         basis, q, scan_select)
    dist = float(np.mean((np.asarray(res) - rec) ** 2))
    return TransformDecision(mode, quantized, scanned, rec, dist,
                             float("nan"), float("nan"), (float("nan"),) * 2)


class InsufficientDataError(ValueError):
    """Too few operating points to fit the lambda-Q model."""


def pair_slopes(samples) -> tuple[np.ndarray, np.ndarray]:
    """Negative distortion/rate slopes between neighboring operating points.

    `samples` is a sequence of (Q, bpp, MSE). Each consecutive pair (after
    sorting by Q) yields one slope -dD/dR attributed to the central Q of the
    pair (geometric mean). Non-positive slopes, which carry no information
    about the multiplier, are dropped.
    """
    pts = sorted((float(q), float(r), float(d)) for q, r, d in samples)
    qs, lams = [], []
    for (q0, r0, d0), (q1, r1, d1) in zip(pts, pts[1:]):
        if r1 == r0:
            continue
        slope = -(d1 - d0) / (r1 - r0)
        if slope > 0:
            qs.append(np.sqrt(q0 * q1))
            lams.append(slope)
    return np.asarray(qs), np.asarray(lams)


def fit_slopes(qs: np.ndarray, lams: np.ndarray) -> tuple[LambdaQModel, float]:
    """Least-squares fit of log(lambda) = log(a) + b log(Q), with R^2."""
    if len(qs) < 2:
        raise InsufficientDataError("need at least two usable slope estimates")
    x = np.log(np.asarray(qs, dtype=np.float64))
    y = np.log(np.asarray(lams, dtype=np.float64))
    b, log_a = np.polyfit(x, y, 1)
    pred = log_a + b * x
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_square = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return LambdaQModel(a=float(np.exp(log_a)), b=float(b)), r_square


def fit_lambda_q(samples) -> tuple[LambdaQModel, float]:
    """Fit the lambda-Q power law from one sweep's (Q, bpp, MSE) samples."""
    qs = {float(q) for q, _, _ in samples}
    if len(qs) < 3:
        raise InsufficientDataError(
            f"need at least 3 distinct Q values, got {len(qs)}"
        )
    return fit_slopes(*pair_slopes(samples))
