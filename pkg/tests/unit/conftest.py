import numpy as np
import pytest

from iblab.gaussian_core import GaussianJoint


@pytest.fixture
def rho05() -> GaussianJoint:
    """Bivariate unit-variance joint over X and Y with correlation 0.5."""
    return GaussianJoint.from_blocks(["X", "Y"], [[1.0, 0.5], [0.5, 1.0]])


@pytest.fixture
def chain_xty() -> GaussianJoint:
    """Unit SEM X->T->Y, blocks ordered (X, Y, T)."""
    cov = [[1.0, 1.0, 1.0], [1.0, 3.0, 2.0], [1.0, 2.0, 2.0]]
    return GaussianJoint.from_blocks(["X", "Y", "T"], cov)


@pytest.fixture
def fork() -> GaussianJoint:
    """Unit SEM T<-X->Y, blocks ordered (X, Y, T)."""
    cov = [[1.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]
    return GaussianJoint.from_blocks(["X", "Y", "T"], cov)


@pytest.fixture
def independent() -> GaussianJoint:
    return GaussianJoint.from_blocks(["X", "Y", "T"], np.eye(3))


@pytest.fixture
def two_pairs() -> GaussianJoint:
    """2-D X and Y made of two independent pairs with correlations 0.8 and 0.3."""
    cov = np.eye(4)
    cov[0, 2] = cov[2, 0] = 0.8
    cov[1, 3] = cov[3, 1] = 0.3
    return GaussianJoint([("X", 2), ("Y", 2)], cov)
