import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isda.errors import ContractViolation, DegenerateCovarianceError
from isda.linalg import min_eigenvalue_bound, mvn_sample, outer_product, psd_factor, quadratic_form


def naive_quadratic(M, v):
    total = 0.0
    for i in range(len(v)):
        for j in range(len(v)):
            total += v[i] * M[i][j] * v[j]
    return total


def test_quadratic_form_examples():
    assert quadratic_form(np.zeros((3, 3)), [1.0, -2.0, 5.0]) == 0.0
    assert quadratic_form(np.eye(2), [-1.0, 1.0]) == 2.0
    M = [[2.0, 1.0], [1.0, 3.0]]
    assert naive_quadratic(M, [1.0, 2.0]) == 18.0
    assert quadratic_form(M, [1.0, 2.0]) == 18.0


def test_quadratic_form_dimension_mismatch():
    with pytest.raises(ContractViolation):
        quadratic_form(np.eye(3), [1.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, (n, n), elements=st.floats(-10, 10)),
        arrays(np.float64, (n,), elements=st.floats(-10, 10)),
    )))
def test_quadratic_form_matches_double_loop(mv):
    B, v = mv
    M = 0.5 * (B + B.T)
    ref = naive_quadratic(M, v)
    got = quadratic_form(M, v)
    scale = np.abs(v) @ np.abs(M) @ np.abs(v)
    assert abs(got - ref) <= 1e-12 * max(scale, 1e-300)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_quadratic_form_psd_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    F = rng.uniform(-10, 10, (n, int(rng.integers(1, n + 1))))
    M = F @ F.T
    M = 0.5 * (M + M.T)
    v = rng.uniform(-10, 10, n)
    assert quadratic_form(M, v) >= -1e-9 * (1 + np.trace(M))


def test_outer_product_examples():
    assert np.array_equal(outer_product([0.0, 0.0], [0.0, 0.0]), np.zeros((2, 2)))
    assert np.array_equal(outer_product([1.0, 2.0], [1.0, 2.0]), [[1, 2], [2, 4]])
    u = np.array([3.0, -1.0])
    ref = np.array([[u[i] * u[j] for j in range(2)] for i in range(2)])
    assert np.array_equal(ref, [[9, -3], [-3, 1]])
    assert np.array_equal(outer_product(u, u), ref)
    with pytest.raises(ContractViolation):
        outer_product([1.0], [1.0, 2.0])


def test_outer_product_symmetric_exactly(rng):
    u = rng.standard_normal(7)
    P = outer_product(u, u)
    assert np.array_equal(P, P.T)


def test_min_eigenvalue_bound():
    b = min_eigenvalue_bound(np.eye(3))
    assert 0 < b <= 1
    assert min_eigenvalue_bound(np.zeros((2, 2))) == 0.0
    # closed form: eigenvalues of [[2,1],[1,2]] are 1 and 3
    b = min_eigenvalue_bound([[2.0, 1.0], [1.0, 2.0]])
    assert 0.0 <= b <= 1.0


def test_min_eigenvalue_bound_is_a_lower_bound(rng):
    for _ in range(50):
        B = rng.standard_normal((5, 5))
        M = 0.5 * (B + B.T)
        assert min_eigenvalue_bound(M) <= np.linalg.eigvalsh(M)[0] + 1e-12


def test_mvn_zero_scale_returns_mean():
    mean = np.array([1.5, -2.0, 0.25])
    draws = mvn_sample(mean, np.eye(3), 0.0, 7, 20)
    assert np.array_equal(draws, np.tile(mean, (20, 1)))


def test_mvn_moments_law_of_large_numbers():
    n = 100_000
    draws = mvn_sample(np.zeros(3), np.eye(3), 1.0, 2024, n)
    assert np.all(np.abs(draws.mean(axis=0)) <= 3 / np.sqrt(n))
    cov = np.cov(draws.T, bias=True)
    assert np.max(np.abs(cov - np.eye(3))) <= 0.05


def test_mvn_rank_deficient_direction_is_constant():
    draws = mvn_sample(np.array([1.0, -3.0]), np.array([[4.0, 0.0], [0.0, 0.0]]), 1.0, 3, 1000)
    assert np.all(draws[:, 1] == -3.0)
    assert draws[:, 0].std() > 1.0


def test_mvn_seed_determinism():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = mvn_sample([0.0, 1.0], cov, 0.7, 99, 50)
    b = mvn_sample([0.0, 1.0], cov, 0.7, 99, 50)
    assert a.tobytes() == b.tobytes()


def test_psd_factor_reconstructs(rng):
    F = rng.standard_normal((6, 3))
    S = F @ F.T
    L = psd_factor(S)
    assert np.allclose(L @ L.T, S, atol=1e-12)


def test_indefinite_covariance_raises():
    with pytest.raises(DegenerateCovarianceError):
        mvn_sample([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]], 1.0, 0, 5)
    with pytest.raises(ContractViolation):
        mvn_sample([0.0], [[1.0]], -1.0, 0, 5)
