import numpy as np
import pytest
from hypothesis import given, strategies as st

from mottprop.hubbard import HubbardParams, assemble_potential, assemble_static, chain_hopping, enumerate_basis
from mottprop.pulse import DriveProfile, Generator, g_derivative, g_eval, generator_apply, generator_derivative_apply

from conftest import transistor_generator


def test_g_values():
    p = DriveProfile(10.0, 2.0**-5)
    assert g_eval(p, 10.0) == 0.5
    assert abs(g_eval(p, 10.0 + 2.0**-5) - (1 - 1 / (np.e + 1))) < 1e-15
    assert abs(g_eval(p, 10.0 + 2.0**-5) - 0.7310585786300049) < 1e-15
    for x in (30, 50, 800, 1e6):
        assert g_eval(p, 10 - x * p.width) < 1e-12
        assert 1 - g_eval(p, 10 + x * p.width) < 1e-12


def test_g_derivative_examples():
    p = DriveProfile(3.0, 0.1)
    assert g_derivative(p, 1, 3.0) == pytest.approx(1 / (4 * 0.1), rel=1e-15)
    assert g_derivative(p, 2, 3.0) == 0.0
    half = DriveProfile(3.0, 0.05)
    x = 0.37
    assert g_derivative(half, 1, 3 + x * 0.05) == pytest.approx(2 * g_derivative(p, 1, 3 + x * 0.1), rel=1e-13)
    with pytest.raises(ValueError):
        g_derivative(p, 3, 3.0)
    with pytest.raises(ValueError):
        DriveProfile(0.0, 0.0)


@pytest.mark.parametrize("T", [2.0**-5, 0.5, 3.0])
def test_finite_differences(T):
    p = DriveProfile(10.0, T)
    h = 1e-5 * T
    for t in np.linspace(10 - 10 * T, 10 + 10 * T, 81):
        d1 = (g_eval(p, t + h) - g_eval(p, t - h)) / (2 * h)
        assert abs(d1 - g_derivative(p, 1, t)) <= 1e-6 * abs(g_derivative(p, 1, t))
        d2 = (g_derivative(p, 1, t + h) - g_derivative(p, 1, t - h)) / (2 * h)
        exact = g_derivative(p, 2, t)
        assert abs(d2 - exact) <= 1e-6 * max(abs(exact), 1e-3 / T**2)


@given(st.floats(2.0**-8, 4.0))
def test_derivative_scaling(T):
    xs = np.linspace(-8, 8, 161)
    ref = DriveProfile(0.0, 1.0)
    p = DriveProfile(0.0, T)
    for k in (1, 2):
        a = max(abs(g_derivative(p, k, x * T)) * T**k for x in xs)
        b = max(abs(g_derivative(ref, k, x)) for x in xs)
        assert a == pytest.approx(b, rel=1e-12)


def test_generator_examples(rng):
    _, gen = transistor_generator()
    v = rng.standard_normal(gen.dim) + 1j * rng.standard_normal(gen.dim)
    assert not np.any(generator_apply(gen, 10.0, np.zeros(gen.dim, complex)))
    np.testing.assert_allclose(generator_apply(gen, -1e6, v), -1j * (gen.h_stat @ v), atol=1e-12)
    d = gen.drives[0][1]
    np.testing.assert_allclose(generator_derivative_apply(gen, 1, 10.0, v),
                               -1j / (4 * gen.drive.width) * d * v, rtol=1e-14)
    assert not np.any(generator_derivative_apply(gen, 2, 10.0, v))


def test_generator_without_potential(rng):
    b = enumerate_basis(2, (1, 1))
    params = HubbardParams(2, chain_hopping(2, -1), 10.0, np.zeros(2))
    gen = Generator.single(assemble_static(params, b), assemble_potential(np.zeros(2), b), DriveProfile(1, 1))
    v = rng.standard_normal(b.dim).astype(complex)
    np.testing.assert_array_equal(gen.apply(0.3, v), gen.apply(7.0, v))
    assert not np.any(gen.derivative_apply(1, 1.0, v))


def test_derivative_norm_identity():
    _, gen = transistor_generator(sector=None)
    hpot = np.linalg.norm(gen.potential_matrix(), 2)
    for t in (9.9, 10.0, 10.05):
        for k in (1, 2):
            Ak = np.column_stack([gen.derivative_apply(k, t, e) for e in np.eye(gen.dim, dtype=complex)])
            assert np.linalg.norm(Ak, 2) == pytest.approx(abs(g_derivative(gen.drive, k, t)) * hpot, rel=1e-14)


def test_matvec_counter(rng):
    _, gen = transistor_generator()
    v = rng.standard_normal(gen.dim).astype(complex)
    gen.apply(0.0, v)
    gen.derivative_apply(1, 0.0, v)
    gen.combination(0.5, [0.1], v)
    assert gen.matvecs == 3
    with pytest.raises(ValueError):
        gen.apply(0.0, np.ones(gen.dim + 1))
