# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from effmaster.core.deformed_su2 import extract_polynomial
from effmaster.core.models import coupled_oscillators, dicke, second_harmonic

DELTA = 1.0
G = 0.05
GAMMA = 0.01


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def coupled_small():
    """Coupled oscillators at Delta = 1 on a 5 x 5 truncation (d = 25)."""
    model, alg = coupled_oscillators(1.0, 2.0, G, GAMMA, 5, 5)
    return model, extract_polynomial(alg)


@pytest.fixture
def shg_small():
    model, alg = second_harmonic(1.0, 3.0, G, GAMMA, 6, 4)
    return model, extract_polynomial(alg)


@pytest.fixture
def dicke_small():
    model, alg = dicke(1.0, 2.0, G, GAMMA, 1, 5)
    return model, extract_polynomial(alg)


@pytest.fixture
def dicke_two_atoms():
    model, alg = dicke(1.0, 2.0, G, GAMMA, 2, 4)
    return model, extract_polynomial(alg)


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)
