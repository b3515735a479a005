from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mottprop.hubbard import (HubbardParams, all_occupations, annihilation_matrix,
                              apply_hop, assemble_potential, assemble_static, chain_hopping,
                              enumerate_basis, occupation_expectation, occupation_observer,
                              orbital)


@pytest.mark.parametrize("n, sector, size", [(1, None, 4), (2, None, 16), (3, None, 64),
                                             (8, (4, 4), 4900), (6, (3, 3), 400), (4, (1, 3), 16)])
def test_basis_sizes(n, sector, size):
    b = enumerate_basis(n, sector)
    assert b.dim == size


@given(st.integers(1, 5), st.data())
def test_basis_invariants(n, data):
    nu = data.draw(st.integers(0, n))
    nd = data.draw(st.integers(0, n))
    b = enumerate_basis(n, (nu, nd))
    assert b.dim == comb(n, nu) * comb(n, nd)
    assert np.all(np.diff(b.states) > 0)
    assert all(b.index_of[int(s)] == k for k, s in enumerate(b.states))


@pytest.mark.parametrize("sector", [(3, 0), (-1, 1), (0, 4)])
def test_sector_out_of_range(sector):
    with pytest.raises(ValueError):
        enumerate_basis(2, sector)


def test_hop_diagonal_is_number_operator():
    b = enumerate_basis(2)
    s = b.index_of[1 << orbital(0, "up")]
    assert apply_hop(b, 0, 0, "up", s) == (s, 1)
    assert apply_hop(b, 0, 0, "down", s) is None


def test_hop_from_vacuum():
    b = enumerate_basis(3)
    vac = b.index_of[0]
    for i in range(3):
        for j in range(3):
            if i != j:
                assert apply_hop(b, i, j, "up", vac) is None


def test_hop_sign_across_occupied_orbital():
    # up electron on site 0 hops to site 1 past an occupied down orbital on site 0
    b = enumerate_basis(2)
    start = (1 << orbital(0, "up")) | (1 << orbital(0, "down"))
    target = (1 << orbital(1, "up")) | (1 << orbital(0, "down"))
    assert apply_hop(b, 0, 1, "up", b.index_of[start]) == (b.index_of[target], -1)
    # nothing in between: +1
    start = 1 << orbital(0, "up")
    target = 1 << orbital(1, "up")
    assert apply_hop(b, 0, 1, "up", b.index_of[start]) == (b.index_of[target], 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_anticommutation(n):
    b = enumerate_basis(n)
    ops = [annihilation_matrix(b, a) for a in range(2 * n)]
    eye = np.eye(b.dim)
    for a, ca in enumerate(ops):
        for c, cb in enumerate(ops):
            assert np.array_equal(ca @ cb + cb @ ca, np.zeros_like(eye))
            assert np.array_equal(ca @ cb.T + cb.T @ ca, eye if a == c else 0 * eye)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hopping_matches_creation_annihilation(n, rng):
    b = enumerate_basis(n)
    hop = rng.standard_normal((n, n))
    hop = hop + hop.T
    U = 3.7
    H = assemble_static(HubbardParams(n, hop, U, np.zeros(n)), b).toarray()
    c = [annihilation_matrix(b, a) for a in range(2 * n)]
    ref = np.zeros((b.dim, b.dim))
    for i in range(n):
        for j in range(n):
            for s in range(2):
                ref += hop[i, j] * c[orbital(j, s)].T @ c[orbital(i, s)]
        ref += U * (c[orbital(i, 0)].T @ c[orbital(i, 0)]) @ (c[orbital(i, 1)].T @ c[orbital(i, 1)])
    np.testing.assert_allclose(H, ref, atol=1e-12)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_static_exactly_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    hop = rng.standard_normal((n, n))
    hop = (hop + hop.T) / 2
    b = enumerate_basis(n)
    H = assemble_static(HubbardParams(n, hop, float(rng.uniform(0, 10)), np.zeros(n)), b)
    assert H.hermitian and H.is_exactly_hermitian()
    m = H.matrix
    assert np.all(m.data != 0)
    for r in range(H.dim):
        cols = m.indices[m.indptr[r]:m.indptr[r + 1]]
        assert np.all(np.diff(cols) > 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sector_equals_projection(n, rng):
    hop = chain_hopping(n, -1.0)
    hop[0, -1] = hop[-1, 0] = 0.3
    pots = rng.standard_normal(n)
    params = HubbardParams(n, hop, 4.0, pots)
    full = enumerate_basis(n)
    Hf = assemble_static(params, full).toarray()
    Pf = assemble_potential(pots, full).toarray()
    for nu in range(n + 1):
        for nd in range(n + 1):
            sec = enumerate_basis(n, (nu, nd))
            idx = np.array([full.index_of[int(s)] for s in sec.states])
            np.testing.assert_array_equal(assemble_static(params, sec).toarray(), Hf[np.ix_(idx, idx)])
            np.testing.assert_array_equal(assemble_potential(pots, sec).toarray(), Pf[np.ix_(idx, idx)])
            # no coupling out of the sector
            rest = np.setdiff1d(np.arange(full.dim), idx)
            assert not np.any(Hf[np.ix_(rest, idx)])


def test_single_particle_spectrum():
    v = -1.3
    b = enumerate_basis(2, (1, 0))
    H = assemble_static(HubbardParams(2, chain_hopping(2, v), 5.0, np.zeros(2)), b).toarray()
    np.testing.assert_allclose(np.linalg.eigvalsh(H), [-abs(v), abs(v)], atol=1e-14)


def test_single_site_spectrum():
    b = enumerate_basis(1)
    H = assemble_static(HubbardParams(1, np.zeros((1, 1)), 6.0, np.zeros(1)), b).toarray()
    np.testing.assert_array_equal(H, np.diag([0, 0, 0, 6.0]))


@pytest.mark.parametrize("U, v", [(0.0, -1.0), (1.0, -1.0), (10.0, -1.0), (10.0, 0.7)])
def test_two_site_half_filling_energy(U, v):
    b = enumerate_basis(2, (1, 1))
    H = assemble_static(HubbardParams(2, chain_hopping(2, v), U, np.zeros(2)), b).toarray()
    assert abs(np.linalg.eigvalsh(H)[0] - (U - np.sqrt(U**2 + 16 * v**2)) / 2) < 1e-12


def test_potential_examples():
    b = enumerate_basis(1)
    assert assemble_potential([0.0], b).nnz == 0
    P = assemble_potential([2.0], b).toarray()
    assert P[b.index_of[0b11], b.index_of[0b11]] == 4.0

    b8 = enumerate_basis(8, (4, 4))
    pots = np.zeros(8)
    pots[0], pots[-1] = 10.4, -10.4
    d = assemble_potential(pots, b8).diagonal().real
    key = b8.occupations(0, 0) + b8.occupations(0, 1) - b8.occupations(7, 0) - b8.occupations(7, 1)
    np.testing.assert_array_equal(d, 10.4 * key)


def test_params_validation():
    with pytest.raises(ValueError):
        HubbardParams(2, np.array([[0, 1], [2, 0.0]]), 1.0, np.zeros(2))
    with pytest.raises(ValueError):
        HubbardParams(2, chain_hopping(2, -1), -1.0, np.zeros(2))
    with pytest.raises(ValueError):
        assemble_static(HubbardParams(3, chain_hopping(3, -1), 1.0, np.zeros(3)), enumerate_basis(2))


def test_occupation_examples():
    b = enumerate_basis(2)
    full = np.zeros(b.dim, complex)
    full[b.index_of[0b1111]] = 1
    vac = np.zeros(b.dim, complex)
    vac[b.index_of[0]] = 1
    for i in range(2):
        for s in ("up", "down"):
            assert occupation_expectation(b, full, i, s) == 1.0
            assert occupation_expectation(b, vac, i, s) == 0.0
    sup = np.zeros(b.dim, complex)
    sup[b.index_of[1 << orbital(0, "up")]] = sup[b.index_of[1 << orbital(1, "up")]] = 1 / np.sqrt(2)
    assert abs(occupation_expectation(b, sup, 0, "up") - 0.5) < 1e-15
    obs = occupation_observer(b)
    assert obs.names == ["n1_up", "n1_dn", "n2_up", "n2_dn"]


@given(st.integers(1, 4), st.data())
@settings(max_examples=30, deadline=None)
def test_sum_rule(n, data):
    nu, nd = data.draw(st.integers(0, n)), data.draw(st.integers(0, n))
    seed = data.draw(st.integers(0, 2**31 - 1))
    b = enumerate_basis(n, (nu, nd))
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    psi /= np.linalg.norm(psi)
    assert abs(all_occupations(b, psi).sum() - (nu + nd)) <= 1e-12
