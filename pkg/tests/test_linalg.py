import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgritopt.linalg import (build_laplacian, factor_shifted, power_iteration, solve_shifted,
                             spectral_norm)
from oracles import dense_laplacian


@pytest.mark.parametrize("d,n,length", [(1, 5, 1.0), (1, 40, 1.0), (2, 4, 3 * np.pi),
                                        (2, 7, 1.0)])
def test_apply_matches_dense_assembly(d, n, length, rng):
    A = build_laplacian(d, n, length)
    D = dense_laplacian(d, n, length)
    np.testing.assert_allclose(A.dense(), D, rtol=0, atol=1e-9 * np.abs(D).max())
    V = rng.standard_normal((3, A.N))
    np.testing.assert_allclose(A.apply(V), V @ D.T, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(A.apply(V[0]), D @ V[0], rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("d,n", [(1, 3), (1, 40), (1, 257), (2, 5), (2, 16)])
def test_spectral_norm_closed_form(d, n):
    A = build_laplacian(d, n, 1.0)
    if A.N <= 300:
        exact = np.linalg.eigvalsh(dense_laplacian(d, n, 1.0)).max()
        assert spectral_norm(A) == pytest.approx(exact, rel=1e-12)
    assert power_iteration(A, iters=200000, rtol=1e-15) == pytest.approx(A.spectral_norm(),
                                                                         rel=1e-6)


def test_spd(rng):
    for d, n in [(1, 10), (2, 6)]:
        D = build_laplacian(d, n, 1.0).dense()
        np.testing.assert_array_equal(D, D.T)
        assert np.linalg.eigvalsh(D).min() > 0


def test_one_dimensional_norm_example():
    # h = 1/41: L = 4 * 41^2 * sin^2(40 pi / 82)
    A = build_laplacian(1, 40, 1.0)
    assert A.spectral_norm() == pytest.approx(4 * 41 ** 2 * np.sin(40 * np.pi / 82) ** 2)
    assert A.spectral_norm() < 4 * 41 ** 2


@pytest.mark.parametrize("d,n", [(1, 9), (2, 5)])
@pytest.mark.parametrize("sigma", [1e-4, 0.3, 50.0])
def test_shifted_solve_roundtrip(d, n, sigma, rng):
    A = build_laplacian(d, n, 2.0)
    F = factor_shifted(A, sigma)
    B = rng.standard_normal((4, A.N))
    X = solve_shifted(F, B)
    np.testing.assert_allclose(F.apply_shifted(X), B, atol=1e-11)
    M = np.eye(A.N) + sigma * dense_laplacian(d, n, 2.0)
    np.testing.assert_allclose(X[1], np.linalg.solve(M, B[1]), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(F.solve(B[2]), X[2], rtol=0, atol=0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 30), sigma=st.floats(1e-6, 1e3), seed=st.integers(0, 2 ** 31))
def test_shifted_solve_property(n, sigma, seed):
    A = build_laplacian(1, n, 1.0)
    b = np.random.default_rng(seed).standard_normal(n)
    x = A.factor_shifted(sigma).solve(b)
    assert np.linalg.norm(x + sigma * A.apply(x) - b) <= 1e-9 * (1 + np.linalg.norm(b))
    # (I + sigma A)^{-1} is a contraction
    assert np.linalg.norm(x) <= np.linalg.norm(b) * (1 + 1e-12)


def test_errors():
    with pytest.raises(ValueError):
        build_laplacian(3, 4, 1.0)
    with pytest.raises(ValueError):
        build_laplacian(1, 1, 1.0)
    with pytest.raises(ValueError):
        build_laplacian(1, 4, -1.0)
    A = build_laplacian(1, 4, 1.0)
    with pytest.raises(ValueError):
        A.factor_shifted(0.0)
    with pytest.raises(ValueError):
        A.apply(np.zeros(5))
    with pytest.raises(ValueError):
        A.factor_shifted(1.0).solve(np.zeros(3))
