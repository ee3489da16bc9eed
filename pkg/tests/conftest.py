import numpy as np
import pytest

from mfspin import PAULI, Interaction, LocalObservable, one_site, pauli_observable


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_hermitian(dim, rng, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_density(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / rho.trace().real


def random_one_site(rng, scale=1.0):
    return one_site(random_hermitian(2, rng, scale))


def random_small_model(rng):
    """Random chain model: one-site field plus a nearest-neighbour term."""
    field = one_site(random_hermitian(2, rng, 0.7))
    pair = LocalObservable(
        ((0,), (1,)), random_hermitian(4, rng, 0.5), n=2
    )
    phi = Interaction((field, pair), n=2)
    x_obs = random_one_site(rng)
    y_obs = random_one_site(rng)
    return phi, x_obs, y_obs


SX, SY, SZ = PAULI["x"], PAULI["y"], PAULI["z"]


def sigma(word, coeff=1.0):
    return pauli_observable(word, coeff)
