import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratbo import rng
from stratbo.gp import (ContractViolation, DesignPoint, FactorizationError, KernelParams, Observation, _factor,
                        fit_hyperparameters, kernel_grad_rows, kernel_matrix, log_marginal_likelihood, posterior,
                        posterior_from_arrays)

from _support import central_diff, random_posterior


def test_kernel_params_validation():
    with pytest.raises(ContractViolation):
        KernelParams(0.0, np.ones(1), np.ones(1))
    with pytest.raises(ContractViolation):
        KernelParams(1.0, np.array([-1.0]), np.ones(1))
    p = KernelParams(2.0, [1.0, 2.0], [3.0])
    assert p.x_dim == 2 and p.w_dim == 1
    np.testing.assert_array_equal(p.alpha, [1.0, 2.0, 3.0])


def test_negative_noise_rejected():
    with pytest.raises(ContractViolation):
        Observation(DesignPoint([0.0], [0.0]), 1.0, -1e-3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 12))
def test_kernel_matrix_symmetric_psd(seed, m):
    gen = np.random.default_rng(seed)
    params = KernelParams(gen.uniform(0.1, 3), gen.uniform(0.1, 5, 2), gen.uniform(0.1, 5, 1))
    P = gen.uniform(-2, 2, (m, 3))
    K = kernel_matrix(params, P, P)
    np.testing.assert_allclose(K, K.T, atol=0)
    np.testing.assert_allclose(np.diag(K), params.sigma0_sq)
    assert np.linalg.eigvalsh(K).min() > -1e-10 * params.sigma0_sq


def test_kernel_grad_rows_matches_fd():
    gen = np.random.default_rng(3)
    params = KernelParams(1.3, [0.7, 2.0], [1.1])
    P = gen.uniform(-1, 1, (5, 3))
    c = gen.uniform(-1, 1, 3)
    k, dk = kernel_grad_rows(params, c, P)
    np.testing.assert_allclose(k, kernel_matrix(params, c, P)[0])
    fd = central_diff(lambda v: kernel_matrix(params, v, P)[0], c)
    np.testing.assert_allclose(dk, fd, rtol=1e-6, atol=1e-9)


def test_posterior_matches_dense_formulas():
    gen = np.random.default_rng(0)
    post = random_posterior(gen, n=6, x_dim=2, w_dim=1)
    params = post.params
    A = kernel_matrix(params, post.X, post.X) + np.diag(post.noise) + post.jitter * np.eye(post.n)
    Q = gen.uniform(-1, 1, (4, 3))
    k = kernel_matrix(params, Q, post.X)
    mean = post.mu0 + k @ np.linalg.solve(A, post.y - post.mu0)
    cov = kernel_matrix(params, Q, Q) - k @ np.linalg.solve(A, k.T)
    np.testing.assert_allclose(post.mean(Q), mean, rtol=1e-10)
    np.testing.assert_allclose(post.cov(Q, Q), cov, atol=1e-10)
    np.testing.assert_allclose(post.var(Q), np.diag(cov), atol=1e-10)


def test_noiseless_posterior_interpolates():
    params = KernelParams(1.0, [4.0], [])
    X = np.array([[-0.5], [0.0], [0.7]])
    y = np.array([0.3, -1.0, 2.0])
    post = posterior_from_arrays(params, 0.0, X, y, np.zeros(3), noise_floor=0.0)
    np.testing.assert_allclose(post.mean(X), y, atol=1e-6)
    assert np.all(post.var(X) < 1e-6)


def test_empty_history_is_prior():
    params = KernelParams(2.0, [1.0], [1.0])
    post = posterior(params, 0.4, [])
    Q = np.array([[0.1, 0.2], [0.3, -1.0]])
    np.testing.assert_allclose(post.mean(Q), 0.4)
    np.testing.assert_allclose(post.var(Q), 2.0)


def test_duplicate_points_escalate_jitter():
    # smallest eigenvalue -1e-9: the first jitter levels cannot fix it
    K = np.array([[1.0, 1.0 + 1e-9], [1.0 + 1e-9, 1.0]])
    chol, jitter = _factor(K, np.zeros(2), 1.0)
    assert 1e-9 < jitter <= 1e-4
    np.testing.assert_allclose(chol @ chol.T, K + jitter * np.eye(2), atol=1e-12)


def test_factorization_error_when_hopeless():
    K = -np.eye(2)
    with pytest.raises(FactorizationError):
        _factor(K, np.zeros(2), 1.0)


def test_with_observation_matches_rebuild():
    gen = np.random.default_rng(1)
    post = random_posterior(gen, n=3)
    new = post.with_observation([0.2, 0.1], 0.5, 0.01)
    assert new.n == 4
    Q = gen.uniform(-1, 1, (3, 2))
    direct = posterior_from_arrays(post.params, post.mu0, np.vstack([post.X, [[0.2, 0.1]]]),
                                   np.append(post.y, 0.5), np.append(post.noise, 0.01))
    np.testing.assert_allclose(new.mean(Q), direct.mean(Q))


def test_log_likelihood_gradient_fd():
    gen = np.random.default_rng(2)
    X = gen.uniform(-1, 1, (8, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    noise = np.full(8, 0.01)

    def ll(theta):
        p = KernelParams(np.exp(theta[0]), np.exp(theta[1:2]), np.exp(theta[2:]))
        return log_marginal_likelihood(p, X, y, noise)[0]

    theta = np.array([0.2, 0.5, -0.3])
    p = KernelParams(np.exp(theta[0]), np.exp(theta[1:2]), np.exp(theta[2:]))
    _, _, g = log_marginal_likelihood(p, X, y, noise, grad=True)
    np.testing.assert_allclose(g, central_diff(ll, theta, 1e-5), rtol=1e-5)


def test_profiled_mean_maximizes_likelihood():
    gen = np.random.default_rng(4)
    X = gen.uniform(-1, 1, (6, 1))
    y = 3.0 + gen.normal(size=6)
    p = KernelParams(1.0, [2.0], [])
    ll, mu = log_marginal_likelihood(p, X, y, np.full(6, 0.1))
    for d in (-0.1, 0.1):
        assert log_marginal_likelihood(p, X, y, np.full(6, 0.1), mu0=mu + d)[0] < ll


def _history(gen, n, f):
    out = []
    for _ in range(n):
        x, w = gen.uniform(-1, 1, 1), gen.uniform(-1, 1, 1)
        out.append(Observation(DesignPoint(x, w), f(x[0], w[0]) + 0.01 * gen.normal(), 1e-4))
    return out


def test_fit_deterministic_and_sensible():
    gen = np.random.default_rng(5)
    hist = _history(gen, 25, lambda x, w: np.sin(3 * x) + 0.1 * w)
    a = fit_hyperparameters(hist, seed=7)
    b = fit_hyperparameters(hist, seed=7)
    assert a == b
    assert not a.fallback
    # x varies faster than w in the data
    assert a.params.alpha_x[0] > a.params.alpha_w[0]
    ll_default, _ = log_marginal_likelihood(KernelParams(1.0, [1.0], [1.0]), *_arrays(hist))
    assert a.log_likelihood >= ll_default


def _arrays(hist):
    X = np.array([o.point.vector for o in hist])
    return X, np.array([o.y for o in hist]), np.array([o.noise_var for o in hist])


def test_fit_prior_shrinks_length_scales():
    gen = np.random.default_rng(6)
    hist = _history(gen, 5, lambda x, w: w - x * x)
    mle = fit_hyperparameters(hist, seed=1, spans=[1.0, 1.0])
    tight = fit_hyperparameters(hist, seed=1, spans=[1.0, 1.0], prior_sd=0.5)
    assert np.all(np.abs(np.log(tight.params.alpha)) <= np.abs(np.log(mle.params.alpha)) + 1e-6)


def test_fit_degenerate_history_falls_back():
    hist = [Observation(DesignPoint([x], [0.0]), 1.0, 0.0) for x in (0.0, 0.5, 1.0)]
    res = fit_hyperparameters(hist)
    assert res.fallback
    assert res.mu0 == 1.0


def test_fit_needs_two_points():
    with pytest.raises(ContractViolation):
        fit_hyperparameters([Observation(DesignPoint([0.0], [0.0]), 1.0, 0.0)])


def test_streams_reproducible_and_distinct():
    a = rng.stream(3, 1, 2).random(4)
    b = rng.stream(3, 1, 2).random(4)
    c = rng.stream(3, 1, 3).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert rng.child_seed(3, 1) == rng.child_seed(3, 1)
    assert 0 <= rng.child_seed(3, 1) < 2**63


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_posterior_variance_bounded_and_monotone(seed):
    gen = np.random.default_rng(seed)
    post = random_posterior(gen, n=int(gen.integers(0, 7)))
    Q = gen.uniform(-1.5, 1.5, (20, 2))
    v0 = post.var(Q)
    assert np.all(v0 <= post.params.sigma0_sq + 1e-8)
    after = post.with_observation(gen.uniform(-1, 1, 2), float(gen.normal()), float(gen.uniform(0, 0.1)))
    assert np.all(after.var(Q) <= v0 + 1e-8)


def test_kernel_symmetric_exactly():
    gen = np.random.default_rng(1)
    params = KernelParams(1.7, [0.4], [2.2])
    for _ in range(20):
        p, q = gen.normal(size=2), gen.normal(size=2)
        assert kernel_matrix(params, p, q)[0, 0] == kernel_matrix(params, q, p)[0, 0]
