import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eiei.gp import (
    DuplicatePointError,
    MaternKernel,
    SingularModelError,
    condition,
    jittered_cholesky,
    kernel_eval,
    posterior_mean_cov,
    sample_paths,
    update,
)

from conftest import random_posterior
from oracles import kriging_dense


def test_kernel_eval_basics(kernel3):
    x, y = np.array([0.1, 0.2, 0.3]), np.array([0.4, 0.1, 0.9])
    assert kernel_eval(kernel3, x, x) == 1.0
    assert kernel_eval(kernel3, x, y) == kernel_eval(kernel3, y, x)
    assert kernel_eval(MaternKernel(2.5, 0.2, 1.5), x, x) == 2.5


def test_kernel_eval_oracle():
    k = MaternKernel(1.0, 0.2121, 6.5)
    # mpmath besselk evaluation of r_6.5(0.1 / 0.2121)
    assert kernel_eval(k, [0.0, 0.0, 0.0], [0.1, 0.0, 0.0]) == pytest.approx(0.77438000246429757, abs=1e-13)


def test_kernel_dimension_mismatch(kernel3):
    with pytest.raises(ValueError):
        kernel_eval(kernel3, [0.1, 0.2], [0.1, 0.2, 0.3])


@pytest.mark.parametrize("bad", [dict(sigma2=0.0), dict(beta=-1.0), dict(nu=0.0)])
def test_kernel_validation(bad):
    with pytest.raises(ValueError):
        MaternKernel(**bad)


def test_empty_design_is_prior(kernel3):
    post = condition(kernel3, np.zeros((0, 3)), [])
    T = np.random.default_rng(0).uniform(size=(4, 3))
    mean, cov = posterior_mean_cov(post, T)
    assert np.all(mean == 0)
    np.testing.assert_allclose(np.diag(cov), 1.0)
    np.testing.assert_allclose(cov, kernel3(T, T))


def test_single_observation_interpolates(kernel3):
    x = np.array([[0.3, 0.6, 0.2]])
    post = condition(kernel3, x, [1.7])
    mean, cov = posterior_mean_cov(post, x)
    assert mean[0] == pytest.approx(1.7, abs=1e-8)
    assert cov[0, 0] <= 1e-8


def test_condition_matches_dense_oracle(kernel3):
    rng = np.random.default_rng(11)
    X = rng.uniform(size=(5, 3))
    y = rng.normal(size=5)
    T = rng.uniform(size=(3, 3))
    post = condition(kernel3, X, y)
    mean, cov = posterior_mean_cov(post, T)
    m_ref, c_ref = kriging_dense(kernel3, X, y, T)
    np.testing.assert_allclose(mean, m_ref, atol=1e-8)
    np.testing.assert_allclose(cov, c_ref, atol=1e-8)


def test_two_nearby_targets_match_dense_oracle(kernel1):
    X = np.array([[0.1], [0.45], [0.8]])
    y = np.array([0.3, -0.2, 1.1])
    T = np.array([[0.6], [0.62]])
    mean, cov = posterior_mean_cov(condition(kernel1, X, y), T)
    m_ref, c_ref = kriging_dense(kernel1, X, y, T)
    np.testing.assert_allclose(mean, m_ref, atol=1e-10)
    np.testing.assert_allclose(cov, c_ref, atol=1e-10)


def test_far_target_reverts_to_prior(kernel3):
    post = random_posterior(np.random.default_rng(2), 3, 8, kernel3)
    mean, cov = posterior_mean_cov(post, np.array([[50.0, 50.0, 50.0]]))
    assert abs(mean[0]) <= 1e-6
    assert cov[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_duplicate_design_rejected(kernel3):
    X = np.array([[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]])
    with pytest.raises(DuplicatePointError):
        condition(kernel3, X, [0.0, 1.0])


def test_nonfinite_values_rejected(kernel3):
    with pytest.raises(ValueError):
        condition(kernel3, np.array([[0.1, 0.1, 0.1]]), [np.nan])


def test_targets_must_be_nonempty(kernel3):
    post = random_posterior(np.random.default_rng(0), 3, 3, kernel3)
    with pytest.raises(ValueError):
        posterior_mean_cov(post, np.zeros((0, 3)))


@settings(max_examples=30)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 25), d=st.sampled_from([1, 2, 3]))
def test_interpolation_and_psd(seed, n, d):
    rng = np.random.default_rng(seed)
    post = random_posterior(rng, d, n)
    mean, cov = posterior_mean_cov(post, post.points)
    assert np.max(np.abs(mean - post.values)) <= 1e-8
    assert np.max(np.diag(cov)) <= 1e-8 * post.kernel.sigma2
    T = rng.uniform(size=(rng.integers(1, 11), d))
    _, cov = posterior_mean_cov(post, T)
    np.testing.assert_allclose(cov, cov.T, atol=0)
    assert np.linalg.eigvalsh(cov).min() >= -1e-10 * post.kernel.sigma2


@settings(max_examples=30)
@given(seed=st.integers(0, 10**6), n=st.integers(0, 15))
def test_variance_reduction(seed, n):
    rng = np.random.default_rng(seed)
    post = random_posterior(rng, 2, n) if n else condition(MaternKernel(1.0, 0.3, 2.5), np.zeros((0, 2)), [])
    T = rng.uniform(size=(12, 2))
    _, before = post.mean_var(T)
    x = rng.uniform(size=2)
    after_post = update(post, x, rng.normal())
    _, after = after_post.mean_var(T)
    assert np.all(after <= before + 1e-10)


def test_mean_var_matches_full_cov(kernel3):
    rng = np.random.default_rng(4)
    post = random_posterior(rng, 3, 10, kernel3)
    T = np.vstack([rng.uniform(size=(6, 3)), post.points[:2]])
    m1, c = posterior_mean_cov(post, T)
    m2, v = post.mean_var(T)
    np.testing.assert_allclose(m1, m2, atol=1e-14)
    np.testing.assert_allclose(np.diag(c), v, atol=1e-14)


def test_update_interpolates_new_point(kernel3):
    post = random_posterior(np.random.default_rng(5), 3, 6, kernel3)
    x = np.array([0.5, 0.5, 0.5])
    new = update(post, x, 2.0)
    m, v = new.mean_var(x[None, :])
    assert m[0] == pytest.approx(2.0, abs=1e-8)
    assert v[0] <= 1e-8


def test_update_matches_condition(kernel3):
    rng = np.random.default_rng(6)
    post = random_posterior(rng, 3, 7, kernel3)
    x, v = rng.uniform(size=3), 0.4
    inc = update(post, x, v)
    batch = condition(kernel3, np.vstack([post.points, x]), np.append(post.values, v))
    P = rng.uniform(size=(10, 3))
    for a, b in zip(posterior_mean_cov(inc, P), posterior_mean_cov(batch, P)):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_chain_of_updates_matches_batch_refit(kernel3):
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(20, 3))
    y = rng.normal(size=20)
    post = condition(kernel3, np.zeros((0, 3)), [])
    for x, v in zip(X, y):
        post = update(post, x, v)
    batch = condition(kernel3, X, y)
    np.testing.assert_allclose(post.chol, batch.chol, atol=1e-10)
    P = rng.uniform(size=(10, 3))
    for a, b in zip(posterior_mean_cov(post, P), posterior_mean_cov(batch, P)):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_update_rejects_duplicate(kernel3):
    post = random_posterior(np.random.default_rng(8), 3, 4, kernel3)
    with pytest.raises(DuplicatePointError):
        update(post, post.points[2], 0.0)


def test_update_is_immutable(kernel3):
    post = random_posterior(np.random.default_rng(9), 3, 4, kernel3)
    n = post.n
    update(post, [0.9, 0.9, 0.9], 1.0)
    assert post.n == n


def test_jitter_ladder_fails_on_indefinite_matrix():
    with pytest.raises(SingularModelError):
        jittered_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]), 1.0)


def test_jitter_ladder_escalates():
    # rank-deficient PSD matrix: needs some jitter but is rescued by the ladder
    v = np.array([[1.0], [1.0], [1.0]])
    K = v @ v.T
    L, eps = jittered_cholesky(K, 1.0)
    assert 1e-12 <= eps <= 1e-6
    np.testing.assert_allclose(L @ L.T, K + eps * np.eye(3), atol=1e-12)


def test_sample_paths_empty_and_deterministic(kernel3):
    grid = np.random.default_rng(0).uniform(size=(20, 3))
    assert sample_paths(kernel3, grid, 0, 1).shape == (0, 20)
    a = sample_paths(kernel3, grid, 5, 42)
    b = sample_paths(kernel3, grid, 5, 42)
    assert a.shape == (5, 20)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_paths(kernel3, grid, 5, 43))


def test_sample_paths_second_moments(kernel3):
    grid = np.random.default_rng(1).uniform(size=(30, 3))
    n = 2000
    paths = sample_paths(kernel3, grid, n, 2024)
    var = (paths**2).mean(axis=0)
    se_var = kernel3.sigma2 * np.sqrt(2.0 / n)
    assert np.all(np.abs(var - kernel3.sigma2) <= 3 * se_var)
    pairs = [(0, 1), (2, 7), (3, 4), (10, 20), (5, 29)]
    K = kernel3(grid, grid)
    for i, j in pairs:
        c = (paths[:, i] * paths[:, j]).mean()
        se = np.sqrt((K[i, i] * K[j, j] + K[i, j] ** 2) / n)
        assert abs(c - K[i, j]) <= 3 * se, (i, j)


def test_sample_paths_rejects_duplicates(kernel3):
    with pytest.raises(DuplicatePointError):
        sample_paths(kernel3, np.zeros((2, 3)), 3, 0)
