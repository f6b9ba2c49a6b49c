import numpy as np
import pytest

from src.models.fields import SymmetricMatrixField
from src.models.lattice import build_domain
from src.models.potentials import PotentialSpec
from src.services.field_service import constant_field, grassmannian_winding_field
from src.utils.constants import PotentialFamily


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end flow checks that take several seconds")


@pytest.fixture
def domain2():
    return build_domain(2, 16, 1.0)


@pytest.fixture
def domain3():
    return build_domain(3, 12, 1.0)


@pytest.fixture
def winding_field():
    domain = build_domain(2, 32, 1.0)
    return grassmannian_winding_field(domain, l=2, k=1, winding=[1, 0], seed=7, perturbation=0.3)


@pytest.fixture
def smoothed_spec():
    return PotentialSpec(PotentialFamily.SMOOTHED, b=0.1)


@pytest.fixture
def singular_spec():
    return PotentialSpec(PotentialFamily.SINGULAR)


@pytest.fixture
def disabled_spec():
    return PotentialSpec(PotentialFamily.SMOOTHED, b=1.0, disabled=True)


@pytest.fixture
def reflection_field(domain2):
    return constant_field(domain2, np.diag([1.0, -1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_symmetric(rng, l=3, low=0.5, high=2.0, gap=None):
    """Q diag(lambda) Q^T with |lambda| in [low, high] and random signs."""
    Q, _ = np.linalg.qr(rng.normal(size=(l, l)))
    lam = rng.uniform(low, high, size=l) * rng.choice([-1.0, 1.0], size=l)
    if gap is not None:
        lam[1] = lam[0] + gap
    f = Q @ np.diag(lam) @ Q.T
    return 0.5 * (f + f.T)


def random_direction(rng, l=3):
    X = rng.normal(size=(l, l))
    return 0.5 * (X + X.T)


def smooth_nondegenerate_field(n, m=2):
    """Rotated diagonal field with well separated eigenvalues."""
    domain = build_domain(m, n, 1.0)
    x, y = domain.coordinates[:, 0], domain.coordinates[:, 1]
    theta = 0.5 * np.sin(2 * np.pi * (x + y))
    lam1 = 2.0 + 0.5 * np.sin(2 * np.pi * x)
    lam2 = -1.0 + 0.3 * np.cos(2 * np.pi * y)
    c, s = np.cos(theta), np.sin(theta)
    mats = np.zeros((domain.site_count, 2, 2))
    mats[:, 0, 0] = c * c * lam1 + s * s * lam2
    mats[:, 1, 1] = s * s * lam1 + c * c * lam2
    mats[:, 0, 1] = c * s * (lam1 - lam2)
    mats[:, 1, 0] = mats[:, 0, 1]
    return SymmetricMatrixField.from_matrices(domain, mats)
