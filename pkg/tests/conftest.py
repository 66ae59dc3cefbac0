import numpy as np
import pytest

from pcac import PointCloud


def make_random_cloud(rng: np.random.Generator, n: int, box: float = 64.0) -> PointCloud:
    """Uniform geometry, independent uniform colors (worst case for coding)."""
    positions = rng.uniform(0.0, box, (n, 3))
    rgb = rng.integers(0, 256, (n, 3), dtype=np.uint8)
    return PointCloud(positions, rgb)


def make_textured_cloud(seed: int = 123, n: int = 6000) -> PointCloud:
    """Smooth color gradient over the box plus 10% uniformly random points."""
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, 100.0, (n, 3))
    base = np.column_stack([
        40 + 160 * positions[:, 0] / 100,
        40 + 160 * positions[:, 1] / 100,
        60 + 120 * positions[:, 2] / 100,
    ])
    rgb = np.clip(np.rint(base), 0, 255).astype(np.uint8)
    noisy = rng.choice(n, n // 10, replace=False)
    rgb[noisy] = rng.integers(0, 256, (len(noisy), 3), dtype=np.uint8)
    return PointCloud(positions, rgb)


def make_two_region_cloud(seed: int = 5, n: int = 8000) -> PointCloud:
    """Half the box constant-colored, half noisy: triggers the slice split."""
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, 100.0, (n, 3))
    rgb = np.full((n, 3), 90, dtype=np.uint8)
    right = positions[:, 0] >= 50.0
    rgb[right] = rng.integers(0, 256, (int(right.sum()), 3), dtype=np.uint8)
    return PointCloud(positions, rgb)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def textured_cloud():
    return make_textured_cloud()


@pytest.fixture(scope="session")
def two_region_cloud():
    return make_two_region_cloud()
