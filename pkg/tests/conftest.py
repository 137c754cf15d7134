import numpy as np
import pytest

from algorithms.coarse_grain import ModelParams
from data.oscillator_model import COMPARISON_FOCK_DIMS, COMPARISON_MODEL, MARKOV_MODEL, REPRESENTATIVE_MODEL


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def representative_params():
    return ModelParams(**REPRESENTATIVE_MODEL, fock_dims=(16, 4))


@pytest.fixture
def markov_params():
    return ModelParams(**MARKOV_MODEL, fock_dims=(16, 4))


@pytest.fixture
def comparison_params():
    return ModelParams(**COMPARISON_MODEL, fock_dims=COMPARISON_FOCK_DIMS)


def random_density_matrix(rng, dim, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (z + z.conj().T)
