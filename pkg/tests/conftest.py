import numpy as np
import pytest

from hyperangle import geometry as geo
from hyperangle import lattice
from hyperangle.lattice import OrbitDataset


def random_rotation(n: int, rng: np.random.Generator) -> geo.GroupElement:
    """A base-point stabilizer element: product of random plane rotations."""
    g = geo.make_rotation(rng.uniform(-np.pi, np.pi), n, (0, 1))
    for i in range(n):
        for j in range(i + 1, n):
            g = g @ geo.make_rotation(rng.uniform(-np.pi, np.pi), n, (i, j))
    return g


def random_group_element(
    n: int, rng: np.random.Generator, t_min: float = 0.05, t_max: float = 3.0
) -> geo.GroupElement:
    t = rng.uniform(t_min, t_max)
    return random_rotation(n, rng) @ geo.make_translation(t, n) @ random_rotation(n, rng)


def random_hyperboloid_point(
    n: int, rng: np.random.Generator, t_max: float = 3.0
) -> geo.HyperboloidPoint:
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    t = rng.uniform(0.05, t_max)
    return geo.HyperboloidPoint(np.concatenate([np.sinh(t) * u, [np.cosh(t)]]))


def synthetic_dataset(
    n: int, count: int, rng: np.random.Generator, t_max: float = 3.0
) -> OrbitDataset:
    """Random points on the hyperboloid shell, for index/counting tests."""
    u = rng.normal(size=(count, n))
    u /= np.linalg.norm(u, axis=1)[:, None]
    t = rng.uniform(0.1, t_max, size=count)
    coords = np.concatenate([np.sinh(t)[:, None] * u, np.cosh(t)[:, None]], axis=1)
    Q = float(np.sqrt(2.0 * np.cosh(t_max)) * 1.01)
    return OrbitDataset(n=n, Q=Q, coords=coords, w=1, source="synthetic")


@pytest.fixture
def rng():
    # function-scoped so every test sees the same stream regardless of order
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def psl2z_q500():
    return lattice.psl2z_orbit(500.0)


@pytest.fixture(scope="session")
def psl2z_q150():
    return lattice.psl2z_orbit(150.0)


@pytest.fixture(scope="session")
def psl2z_q800():
    return lattice.psl2z_orbit(800.0)


@pytest.fixture(scope="session")
def spectrum_q500_t200(psl2z_q500):
    import math

    return lattice.distance_spectrum(psl2z_q500, math.acosh(200.0 ** 2 / 2.0))


@pytest.fixture(scope="session")
def lorentz3_profile():
    return lattice.lorentz_count_profile(3, 5000)
