import numpy as np
import pytest

from mottprop.hubbard import (HubbardParams, assemble_potential, assemble_static, chain_hopping,
                              enumerate_basis)
from mottprop.krylov import ground_state
from mottprop.pulse import DriveProfile, Generator

# step start inside the switch, in switch widths from its centre
IN_PULSE = float(np.log(2 - np.sqrt(3)))


def transistor_generator(n_sites=2, width=2.0**-5, t_switch=10.0, U=10.0, v=-1.0, vsd=20.8, sector="half"):
    if sector == "half":
        sector = (n_sites // 2, n_sites // 2)
    basis = enumerate_basis(n_sites, sector)
    pots = np.zeros(n_sites)
    pots[0], pots[-1] = vsd / 2, -vsd / 2
    params = HubbardParams(n_sites, chain_hopping(n_sites, v), U, pots)
    gen = Generator.single(assemble_static(params, basis), assemble_potential(pots, basis),
                           DriveProfile(t_switch, width))
    return basis, gen


def initial_vector(gen, t=0.0):
    return ground_state(lambda x: gen.hermitian_apply(t, x), gen.dim, tol=1e-12).vector


@pytest.fixture
def testbed():
    """Two-site half-filled transistor and its ground state before the switch."""
    basis, gen = transistor_generator()
    return gen, initial_vector(gen)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
