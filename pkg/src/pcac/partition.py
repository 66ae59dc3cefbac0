"""Layered structure: variance-based slice split and geometry-adaptive kd-tree.

A frame is optionally split into a color-smooth and a color-non-smooth slice.
Each slice is then cut by a kd-tree that always splits the axis of largest
coordinate variance at the median rank, so sibling subtrees differ by at most
one point and all 2^depth leaf blocks end up nearly equal-sized.

Everything here must be reproducible at the decoder from geometry alone, so
all tie-breaking is fixed: equal variances resolve to the lower axis index,
equal coordinates resolve to the lower original point index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ply_io import PointCloud, rgb_to_yuv


class ConfigError(ValueError):
    """Requested partition parameters impossible for the given input."""


@dataclass(frozen=True)
class Slice:
    slice_id: int
    point_indices: np.ndarray  # frame indices, in frame order

    @property
    def count(self) -> int:
        return self.point_indices.shape[0]


@dataclass(frozen=True)
class KdTree:
    """Complete binary kd-tree of a slice, nodes stored in level order.

    split_dims[level][k] / split_values[level][k] describe node k of that
    level; leaves holds the 2^depth leaf index arrays left to right (which is
    also breadth-first order at the leaf level).
    """

    depth: int
    split_dims: list = field(repr=False)
    split_values: list = field(repr=False)
    leaves: list = field(repr=False)

    @property
    def n_blocks(self) -> int:
        return len(self.leaves)


@dataclass(frozen=True)
class Block:
    index: int  # 1-based, breadth-first leaf order == coding order
    point_indices: np.ndarray
    yuv: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.point_indices.shape[0]


@dataclass(frozen=True)
class Macroblock:
    index: int  # 1-based; children are blocks 2i-1 and 2i
    children: tuple


def _split_axis(positions: np.ndarray, idx: np.ndarray) -> int:
    """Axis of largest coordinate variance; ties go to the lower axis."""
    var = positions[idx].var(axis=0)
    return int(np.argmax(var))  # argmax returns the first maximum


def _split_node(positions: np.ndarray, idx: np.ndarray):
    axis = _split_axis(positions, idx)
    coords = positions[idx, axis]
    # primary key: coordinate, secondary: original point index
    order = np.lexsort((idx, coords))
    half = (idx.shape[0] + 1) // 2
    left = idx[order[:half]]
    right = idx[order[half:]]
    value = 0.5 * (coords[order[half - 1]] + coords[order[half]])
    return axis, float(value), left, right


def build_kdtree(slice_: Slice, positions: np.ndarray, depth: int) -> KdTree:
    """Median-rank kd-tree of a slice, split to exactly 2^depth leaves.

    Leaf sizes are floor(m / 2^depth) or ceil(m / 2^depth). Raises
    ConfigError when the slice has fewer than 2^depth points.
    """
    if depth < 0:
        raise ConfigError(f"depth must be >= 0, got {depth}")
    m = slice_.count
    if m < (1 << depth):
        raise ConfigError(f"depth {depth} needs >= {1 << depth} points, slice has {m}")
    frontier = [np.asarray(slice_.point_indices)]
    split_dims: list[list[int]] = []
    split_values: list[list[float]] = []
    for _ in range(depth):
        dims, values, nxt = [], [], []
        for idx in frontier:
            axis, value, left, right = _split_node(positions, idx)
            dims.append(axis)
            values.append(value)
            nxt.append(left)
            nxt.append(right)
        split_dims.append(dims)
        split_values.append(values)
        frontier = nxt
    return KdTree(depth=depth, split_dims=split_dims, split_values=split_values,
                  leaves=frontier)


def choose_depth(point_count: int) -> int:
    """Smallest depth that brings leaf blocks under 200 points.

    The previous depth then had >= 200 points per leaf, so the chosen one has
    >= 100: block sizes land in the (100, 200) working range whenever the
    cloud itself has at least 200 points. Smaller clouds stay a single block.
    """
    if point_count < 1:
        raise ValueError("point_count must be >= 1")
    if point_count < 200:
        return 0
    depth = 0
    while point_count / (1 << depth) >= 200:
        depth += 1
    return depth


def enumerate_blocks(tree: KdTree, yuv: np.ndarray | None = None):
    """Leaf blocks numbered 1..2^depth left to right, plus their parents.

    Macroblock i covers blocks 2i-1 and 2i. Returns (blocks, macroblocks);
    a depth-0 tree has one block and no macroblocks.
    """
    blocks = [
        Block(index=i + 1, point_indices=idx,
              yuv=None if yuv is None else yuv[idx])
        for i, idx in enumerate(tree.leaves)
    ]
    macroblocks = [
        Macroblock(index=i + 1, children=(blocks[2 * i], blocks[2 * i + 1]))
        for i in range(len(blocks) // 2)
    ]
    return blocks, macroblocks


def block_color_variance(yuv: np.ndarray) -> float:
    """Mean of the three per-component population variances of a block."""
    return float(np.asarray(yuv, dtype=np.float64).var(axis=0).mean())


def partition_slices(
    cloud: PointCloud,
    threshold_1: float = 100.0,
    threshold_2: float = 0.3,
    probe_depth: int | None = None,
    yuv: np.ndarray | None = None,
) -> list[Slice]:
    """Split a frame into color-smooth and non-smooth slices, or keep one.

    A probe kd-tree of probe_depth blocks the cloud; blocks whose mean YUV
    variance exceeds threshold_1 are non-smooth. When the non-smooth fraction
    exceeds threshold_2 the frame splits into slice 0 (smooth points) and
    slice 1 (non-smooth points); otherwise a single slice holds everything.
    Point order inside each slice keeps frame order. A split that would leave
    either side empty degrades to the single slice.
    """
    if cloud.count == 0:
        raise ValueError("cannot partition an empty cloud")
    if yuv is None:
        yuv = rgb_to_yuv(cloud.rgb)
    if probe_depth is None:
        probe_depth = choose_depth(cloud.count)

    whole = Slice(0, np.arange(cloud.count, dtype=np.int64))
    if probe_depth == 0 or cloud.count < (1 << probe_depth):
        return [whole]

    probe = build_kdtree(whole, cloud.positions, probe_depth)
    nonsmooth_leaves = [
        idx for idx in probe.leaves if block_color_variance(yuv[idx]) > threshold_1
    ]
    if len(nonsmooth_leaves) / probe.n_blocks <= threshold_2:
        return [whole]
    nonsmooth = np.sort(np.concatenate(nonsmooth_leaves))
    if nonsmooth.size == 0 or nonsmooth.size == cloud.count:
        return [whole]
    mask = np.zeros(cloud.count, dtype=bool)
    mask[nonsmooth] = True
    smooth = np.flatnonzero(~mask).astype(np.int64)
    return [Slice(0, smooth), Slice(1, nonsmooth.astype(np.int64))]
