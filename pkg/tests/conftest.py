import numpy as np
import pytest

from polyrom.rom import ModelBank, PodBasis
from polyrom.solver import BurgersConfig


@pytest.fixture
def fast_cfg():
    """Small grid, short transient: cheap but real solver runs."""
    return BurgersConfig(grid_size=64, transient_time=5.0)


def orthonormal(n, r, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return Q


def synthetic_basis(n=30, r=3, n_cols=8, seed=0):
    """A valid PodBasis that is not tied to any particular data matrix."""
    return PodBasis(
        U=orthonormal(n, r, seed),
        sigma=np.linspace(3.0, 1.0, r),
        V=orthonormal(n_cols, r, seed + 1),
        r=r,
    )


def synthetic_bank(A_locals, p_train, p_min=None, p_max=None):
    A = np.stack([np.atleast_2d(np.asarray(a, dtype=float)) for a in A_locals])
    return ModelBank(
        p_train=np.asarray(p_train, dtype=float),
        A_local=A,
        A_robust=A.mean(axis=0),
        epsilon=1e-2,
        p_min=p_min,
        p_max=p_max,
    )


@pytest.fixture
def scalar_toy():
    """r=1 bank over two local models, identity basis and observation."""
    basis = PodBasis(U=np.array([[1.0]]), sigma=np.array([1.0]),
                     V=np.array([[1.0]]), r=1)
    bank = synthetic_bank([[[0.5]], [[0.9]]], [0.0, 1.0])
    return bank, basis
