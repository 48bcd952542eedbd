import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mtelm.errors import SingularSystemError, UsageError
from mtelm.numerics import (
    KroneckerSystem,
    kron_vec_solve,
    pca_reduce,
    spd_solve,
    spectral_norm_bound,
)

from helpers import assemble_kron_operator, dense_kron_solve


def random_spd(rng, n, jitter=1e-3):
    a = rng.standard_normal((n, n))
    return a @ a.T + jitter * np.eye(n)


# ---------------------------------------------------------------------------
# kron_vec_solve


def test_kron_identity_pair():
    system = KroneckerSystem(pairs=((np.eye(2), np.eye(2)),), shift=1.0)
    x = kron_vec_solve(system, 2.0 * np.eye(2))
    assert_allclose(x, np.eye(2), atol=1e-12)


def test_kron_no_pairs_diagonal_shift():
    system = KroneckerSystem(pairs=(), shift=np.diag([2.0, 4.0]))
    x = kron_vec_solve(system, np.array([[2.0], [4.0]]))
    assert_allclose(x, np.ones((2, 1)), atol=1e-12)


def test_kron_zero_rhs():
    system = KroneckerSystem(pairs=((np.eye(3), np.eye(2)),), shift=0.5)
    assert_allclose(kron_vec_solve(system, np.zeros((2, 3))), np.zeros((2, 3)))


def test_kron_dimension_mismatch():
    system = KroneckerSystem(pairs=((np.eye(3), np.eye(2)),), shift=1.0)
    with pytest.raises(UsageError):
        kron_vec_solve(system, np.zeros((3, 3)))


def test_kron_rejects_asymmetric_pair():
    with pytest.raises(UsageError):
        KroneckerSystem(pairs=((np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2)),), shift=1.0)


def test_kron_singular_operator():
    # one PSD pair with zero shift: operator has a null space
    sa = np.zeros((2, 2))
    sh = np.eye(2)
    with pytest.raises(SingularSystemError):
        kron_vec_solve(KroneckerSystem(pairs=((sa, sh),), shift=0.0), np.ones((2, 2)))


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    p=st.integers(1, 8),
    q=st.integers(1, 8),
    npairs=st.integers(1, 3),
)
def test_kron_matches_dense_assembly(seed, p, q, npairs):
    rng = np.random.default_rng(seed)
    pairs = tuple(
        (random_spd(rng, q, jitter=0.0), random_spd(rng, p, jitter=0.0))
        for _ in range(npairs)
    )
    shift = float(rng.uniform(0.1, 2.0))
    rhs = rng.standard_normal((p, q))
    system = KroneckerSystem(pairs=pairs, shift=shift)
    x = kron_vec_solve(system, rhs)
    expected = dense_kron_solve(pairs, shift, rhs)
    assert_allclose(x, expected, rtol=1e-10, atol=1e-10 * np.abs(expected).max())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 6), q=st.integers(2, 6))
def test_kron_matrix_shift_matches_dense(seed, p, q):
    rng = np.random.default_rng(seed)
    pairs = ((random_spd(rng, q, jitter=0.0), random_spd(rng, p, jitter=0.0)),)
    shift = random_spd(rng, p, jitter=0.5)
    rhs = rng.standard_normal((p, q))
    x = kron_vec_solve(KroneckerSystem(pairs=pairs, shift=shift), rhs)
    expected = dense_kron_solve(pairs, shift, rhs)
    assert_allclose(x, expected, rtol=1e-9, atol=1e-9)


def test_kron_cg_path_large_system():
    # two pairs force the generic path; p*q > 4096 forces conjugate gradients
    rng = np.random.default_rng(7)
    p, q = 65, 64
    pairs = tuple(
        (random_spd(rng, q, jitter=0.0) / q, random_spd(rng, p, jitter=0.0) / p)
        for _ in range(2)
    )
    system = KroneckerSystem(pairs=pairs, shift=1.0)
    rhs = rng.standard_normal((p, q))
    x = kron_vec_solve(system, rhs)
    residual = system.apply(x) - rhs
    assert np.linalg.norm(residual) <= 1e-9 * np.linalg.norm(rhs)


def test_kron_residual_small_on_random_instance():
    rng = np.random.default_rng(3)
    pairs = tuple(
        (random_spd(rng, 3, jitter=0.0), random_spd(rng, 4, jitter=0.0))
        for _ in range(2)
    )
    system = KroneckerSystem(pairs=pairs, shift=0.7)
    rhs = rng.standard_normal((4, 3))
    x = kron_vec_solve(system, rhs)
    assert np.linalg.norm(system.apply(x) - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))


# ---------------------------------------------------------------------------
# spd_solve


def test_spd_solve_diagonal():
    assert_allclose(spd_solve(np.diag([2.0]), np.array([4.0])), np.array([2.0]))


def test_spd_solve_identity_multi_rhs():
    b = np.arange(6.0).reshape(3, 2)
    assert_allclose(spd_solve(np.eye(3), b), b)


def test_spd_solve_rejects_asymmetric():
    m = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(UsageError):
        spd_solve(m, np.ones(2))


def test_spd_solve_rejects_indefinite():
    m = np.diag([1.0, -1.0])
    with pytest.raises(SingularSystemError):
        spd_solve(m, np.ones(2))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12), k=st.integers(1, 4))
def test_spd_solve_residual(seed, n, k):
    rng = np.random.default_rng(seed)
    m = random_spd(rng, n, jitter=0.5)
    b = rng.standard_normal((n, k))
    x = spd_solve(m, b)
    assert np.linalg.norm(m @ x - b) <= 1e-10 * max(1.0, np.linalg.norm(b))


# ---------------------------------------------------------------------------
# spectral_norm_bound


def test_spectral_bound_diag():
    assert_allclose(spectral_norm_bound(np.diag([3.0, 1.0])), 3.0 * 1.01, rtol=1e-6)


def test_spectral_bound_zero():
    assert spectral_norm_bound(np.zeros((4, 2))) == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(1, 10), cols=st.integers(1, 10))
def test_spectral_bound_brackets_svd(seed, rows, cols):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((rows, cols))
    top = np.linalg.svd(m, compute_uv=False)[0]
    bound = spectral_norm_bound(m)
    assert bound >= top * (1.0 - 1e-9)
    assert bound <= top * 1.01 * (1.0 + 1e-6)


# ---------------------------------------------------------------------------
# pca_reduce


def test_pca_two_point_cloud():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    projected, projection, explained = pca_reduce(x, 1)
    assert projected.shape == (4, 1)
    assert_allclose(explained, 1.0, atol=1e-12)
    # the principal direction is the diagonal
    assert_allclose(np.abs(projection[:, 0]), np.full(2, 1.0 / np.sqrt(2)), atol=1e-12)


def test_pca_variance_fraction_example():
    # eigenvalues (4, 1) along the axes: one component explains 0.8 exactly
    rng = np.random.default_rng(0)
    n = 20_000
    x = np.column_stack([2.0 * rng.standard_normal(n), rng.standard_normal(n)])
    # deterministic construction instead: scale exact unit-variance columns
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    a = (a - a.mean()) / a.std(ddof=1)
    b = (b - b.mean()) / b.std(ddof=1)
    b -= a * (a @ b) / (a @ a)  # orthogonalize
    b /= b.std(ddof=1)
    x = np.column_stack([2.0 * a, b])
    projected, projection, explained = pca_reduce(x, 1)
    assert_allclose(explained, 0.8, atol=1e-9)
    _, _, explained_frac = pca_reduce(x, 0.8)
    assert_allclose(explained_frac, 0.8, atol=1e-9)
    projected2, _, explained2 = pca_reduce(x, 0.81)
    assert projected2.shape[1] == 2
    assert_allclose(explained2, 1.0, atol=1e-12)


def test_pca_target_too_large():
    x = np.random.default_rng(0).standard_normal((5, 3))
    with pytest.raises(UsageError):
        pca_reduce(x, 4)


def test_pca_zero_variance():
    x = np.ones((4, 3))
    with pytest.raises(UsageError, match="zero total variance"):
        pca_reduce(x, 1)


def test_pca_bad_fraction():
    x = np.random.default_rng(0).standard_normal((5, 3))
    with pytest.raises(UsageError):
        pca_reduce(x, 1.5)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n_samples=st.integers(4, 30),
    n_features=st.integers(2, 10),
)
def test_pca_orthonormal_and_mass(seed, n_samples, n_features):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_samples, n_features)) * rng.uniform(0.5, 3.0, n_features)
    k = int(rng.integers(1, min(n_samples, n_features) + 1))
    projected, projection, explained = pca_reduce(x, k)
    assert_allclose(projection.T @ projection, np.eye(k), atol=1e-8)
    centered = x - x.mean(axis=0)
    evals = np.linalg.eigvalsh(centered.T @ centered / (n_samples - 1))[::-1]
    evals = np.clip(evals, 0.0, None)
    assert_allclose(explained, evals[:k].sum() / evals.sum(), atol=1e-8)
    assert_allclose(projected, centered @ projection, atol=1e-12)


def test_pca_large_dim_svd_path():
    # n_features above the covariance limit exercises the thin-SVD branch
    rng = np.random.default_rng(1)
    basis = rng.standard_normal((8, 1030))
    coeff = rng.standard_normal((40, 8))
    x = coeff @ basis + 0.01 * rng.standard_normal((40, 1030))
    projected, projection, explained = pca_reduce(x, 8)
    assert projected.shape == (40, 8)
    assert_allclose(projection.T @ projection, np.eye(8), atol=1e-8)
    assert explained > 0.99
