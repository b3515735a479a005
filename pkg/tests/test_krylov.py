import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from mottprop.krylov import (DegenerateGroundState, KrylovBreakdown, KrylovConfig, expmv, ground_state,
                             lanczos_basis)


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2


def dense_exp(B, tau, v):
    w, U = np.linalg.eigh(B)
    return U @ (np.exp(-1j * tau * w) * (U.conj().T @ v))


def test_eigenvector_input():
    d = np.array([0.3, -2.0, 5.0])
    v = np.zeros(3, complex)
    v[1] = 1
    w, mv = expmv(lambda x: d * x, 0.8, v)
    assert mv == 1
    np.testing.assert_allclose(w, np.exp(-1j * 0.8 * d) * v, atol=1e-15)


def test_zero_tau_and_zero_vector():
    v = np.array([1.0, 2.0j])
    w, mv = expmv(lambda x: x, 0.0, v)
    assert mv <= 1 and np.array_equal(w, v)
    with pytest.raises(ValueError):
        expmv(lambda x: x, 1.0, np.zeros(2))


def test_random_8x8(rng):
    B = random_hermitian(rng, 8)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    cfg = KrylovConfig(1e-12)
    w, _ = expmv(lambda x: B @ x, 0.7, v, cfg)
    assert np.linalg.norm(w - expm(-0.7j * B) @ v) <= 10 * cfg.tol * np.linalg.norm(v)


@given(st.integers(1, 64), st.sampled_from([0.01, 0.1, 1.0]), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_oracle_and_unitarity(n, tau, seed):
    rng = np.random.default_rng(seed)
    B = random_hermitian(rng, n)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    cfg = KrylovConfig(1e-12)
    w, _ = expmv(lambda x: B @ x, tau, v, cfg)
    ref = dense_exp(B, tau, v)
    assert np.max(np.abs(w - ref)) <= 10 * cfg.tol
    assert np.linalg.norm(w - ref) <= 10 * cfg.tol
    assert abs(np.linalg.norm(w) - 1) <= cfg.tol


def test_basis_orthogonality(rng):
    n = 1000
    diag = rng.uniform(-5, 5, n)
    off = rng.standard_normal(n - 1)
    import scipy.sparse as sp
    B = sp.diags([off, diag, off], [-1, 0, 1]) + sp.random(n, n, 0.002, random_state=3)
    B = (B + B.T.conj()) / 2
    V, _, _ = lanczos_basis(lambda x: B @ x, rng.standard_normal(n) + 0j, 50)
    G = V.conj() @ V.T
    assert np.max(np.abs(G - np.eye(len(V)))) <= 1e-10


def test_breakdown_carries_best_iterate(rng):
    B = random_hermitian(rng, 60, scale=50.0)
    v = rng.standard_normal(60) + 0j
    with pytest.raises(KrylovBreakdown) as info:
        expmv(lambda x: B @ x, 5.0, v, KrylovConfig(1e-12, m_max=5))
    assert info.value.best.shape == v.shape and info.value.matvecs == 5


def test_ground_state_diagonal():
    d = np.array([3.0, -1.0, 2.0])
    gs = ground_state(lambda x: d * x, 3, tol=1e-12)
    assert gs.energy == pytest.approx(-1.0, abs=1e-12)
    np.testing.assert_allclose(np.abs(gs.vector), [0, 1, 0], atol=1e-10)


def test_ground_state_shift_invariance(rng):
    H = random_hermitian(rng, 30)
    a = ground_state(lambda x: H @ x, 30, tol=1e-11)
    b = ground_state(lambda x: H @ x + 4.25 * x, 30, tol=1e-11)
    assert b.energy - a.energy == pytest.approx(4.25, abs=1e-10)
    assert abs(abs(np.vdot(a.vector, b.vector)) - 1) < 1e-10
    assert a.energy == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-10)


def test_ground_state_reproducible(rng):
    H = random_hermitian(rng, 40)
    a = ground_state(lambda x: H @ x, 40, seed=7)
    b = ground_state(lambda x: H @ x, 40, seed=7)
    assert np.array_equal(a.vector, b.vector)


def test_degenerate_warning():
    d = np.array([-1.0, -1.0, 0.5, 2.0])
    with pytest.warns(DegenerateGroundState):
        gs = ground_state(lambda x: d * x, 4, tol=1e-10)
    assert gs.degenerate
