import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from stratbo.gp import ContractViolation, DesignPoint, KernelParams, kernel_matrix, posterior_from_arrays
from stratbo.quadrature import (DegenerateCandidate, DiscreteW, GaussianW, Projection, compute_a_n, compute_B,
                                compute_sigma_tilde, gaussian_moment, gaussian_moment_dcenter, grad_sigma_tilde,
                                quad_matrix)

from _support import central_diff, gauss_hermite_w, random_discrete_w, random_gaussian_w, random_posterior


def _moment_by_quad(alpha, c, m, v):
    f = lambda w: np.exp(-alpha * (w - c) ** 2) * stats.norm.pdf(w, m, np.sqrt(v))
    return integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)[0]


def test_gaussian_moment_matches_quadrature():
    gen = np.random.default_rng(0)
    for _ in range(20):
        alpha, c, m, v = gen.uniform(0.01, 5), gen.uniform(-2, 2), gen.uniform(-1, 1), gen.uniform(0.1, 3)
        assert abs(gaussian_moment(alpha, c, m, v) - _moment_by_quad(alpha, c, m, v)) < 1e-10


def test_gaussian_moment_limits():
    assert gaussian_moment(0.0, 3.0, 0.0, 1.0) == 1.0
    # a point mass limit: tiny variance gives exp(-alpha (c - m)^2)
    assert abs(gaussian_moment(2.0, 0.5, 0.1, 1e-12) - np.exp(-2.0 * 0.4 ** 2)) < 1e-9
    with pytest.raises(ContractViolation):
        gaussian_moment(1.0, 0.0, 0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 5))
def test_gaussian_moment_in_unit_interval(alpha, c, m, v):
    g = gaussian_moment(alpha, c, m, v)
    assert 0.0 <= g <= 1.0 + 1e-12
    # largest when the kernel is centred on the mean
    assert gaussian_moment(alpha, m, m, v) >= g - 1e-12


def test_gaussian_moment_dcenter_fd():
    for alpha, c, m, v in [(0.7, 0.3, -0.2, 1.3), (3.0, -1.0, 0.5, 0.2), (0.0, 1.0, 0.0, 1.0)]:
        fd = (gaussian_moment(alpha, c + 1e-6, m, v) - gaussian_moment(alpha, c - 1e-6, m, v)) / 2e-6
        assert abs(gaussian_moment_dcenter(alpha, c, m, v) - fd) < 1e-8


def test_discrete_w_validation_and_constructors():
    with pytest.raises(ContractViolation):
        DiscreteW([0.0, 1.0], [0.7, 0.7])
    pois = DiscreteW.poisson(20.0)
    assert abs(pois.probs.sum() - 1) < 1e-12
    assert abs(pois.probs @ pois.support[:, 0] - 20.0) < 1e-5
    u = DiscreteW.uniform(np.linspace(0, 1, 5))
    np.testing.assert_allclose(u.probs, 0.2)
    q = DiscreteW.gaussian_quantiles(1.0, 4.0, atoms=200)
    assert abs(q.probs @ q.support[:, 0] - 1.0) < 1e-12
    np.testing.assert_array_equal(u.nearest_atom([0.3]), [0.25])
    lo, hi = u.search_box()
    assert lo[0] == 0.0 and hi[0] == 1.0


def test_gaussian_w_search_box():
    g = GaussianW([1.0], [4.0])
    lo, hi = g.search_box()
    assert lo[0] == pytest.approx(-11.0) and hi[0] == pytest.approx(13.0)


def test_kernel_mean_grads_fd():
    gen = np.random.default_rng(1)
    alpha = np.array([0.8, 1.7])
    g = GaussianW([0.1, -0.3], [0.5, 1.2])
    d = DiscreteW(gen.uniform(-1, 1, (6, 2)), gen.dirichlet(np.ones(6)))
    w = np.array([0.2, 0.4])
    for wd in (g, d):
        fd = central_diff(lambda v: wd.kernel_mean(alpha, v)[0], w)
        np.testing.assert_allclose(wd.kernel_mean_grad(alpha, w), fd, rtol=1e-7, atol=1e-10)


def test_compute_B_matches_quadrature_gaussian_and_discrete():
    gen = np.random.default_rng(2)
    for wd in (random_gaussian_w(gen), random_discrete_w(gen)):
        post = random_posterior(gen, n=3)
        p = post.params
        for i in range(post.n):
            x = gen.uniform(-1, 1)
            xi, wi = post.X[i, 0], post.X[i, 1]
            if isinstance(wd, GaussianW):
                integrand = lambda w: (kernel_matrix(p, [x, w], [xi, wi])[0, 0]
                                       * stats.norm.pdf(w, wd.means[0], np.sqrt(wd.variances[0])))
                ref = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13)[0]
            else:
                ref = sum(pr * kernel_matrix(p, [x, s[0]], [xi, wi])[0, 0] for s, pr in zip(wd.support, wd.probs))
            assert abs(compute_B(x, i, post, wd) - ref) < 1e-10


def test_compute_B_candidate_index():
    gen = np.random.default_rng(3)
    post = random_posterior(gen, n=2)
    wd = random_gaussian_w(gen)
    c = DesignPoint([0.1], [0.2])
    assert compute_B(0.3, 2, post, wd, candidate=c) == pytest.approx(
        quad_matrix(post.params, wd, [0.3], c.vector)[0, 0])
    with pytest.raises(ContractViolation):
        compute_B(0.3, 2, post, wd)
    with pytest.raises(ContractViolation):
        compute_B(0.3, 5, post, wd, candidate=c)


def test_a_n_is_posterior_mean_of_G():
    # a_n(x) = sum_j p_j mu_n(x, w_j) for discrete w
    gen = np.random.default_rng(4)
    post = random_posterior(gen, n=5)
    wd = random_discrete_w(gen)
    xs = np.linspace(-1, 1, 7)
    ref = [sum(pr * post.mean([x, s[0]])[0] for s, pr in zip(wd.support, wd.probs)) for x in xs]
    np.testing.assert_allclose(compute_a_n(xs, post, wd), ref, atol=1e-12)


def test_a_n_prior_only():
    post = posterior_from_arrays(KernelParams(1.0, [1.0], [1.0]), 0.7, np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    np.testing.assert_allclose(compute_a_n(np.linspace(-1, 1, 4), post, GaussianW([0.0], [1.0])), 0.7)


def test_sigma_tilde_batch_matches_single():
    gen = np.random.default_rng(5)
    post = random_posterior(gen, n=4)
    wd = random_gaussian_w(gen)
    xs = np.linspace(-1, 1, 9)
    proj = Projection(post, wd, xs)
    C = gen.uniform(-1, 1, (6, 2))
    S = proj.sigma_tilde_batch(C, 0.01)
    for c, row in zip(C, S):
        np.testing.assert_allclose(row, compute_sigma_tilde(xs, c, post, wd, 0.01), rtol=1e-10, atol=1e-14)


def test_sigma_tilde_gradient_fd():
    gen = np.random.default_rng(6)
    for wd in (random_gaussian_w(gen), random_discrete_w(gen)):
        post = random_posterior(gen, n=4)
        xs = np.linspace(-1, 1, 6)
        c = gen.uniform(-1, 1, 2)
        g = grad_sigma_tilde(xs, c, post, wd, 0.02)
        fd = central_diff(lambda v: compute_sigma_tilde(xs, v, post, wd, 0.02), c)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)


def test_sigma_tilde_zero_at_noiseless_repeat():
    gen = np.random.default_rng(7)
    post = random_posterior(gen, n=3, noise=(0.0, 0.0))
    wd = random_gaussian_w(gen)
    s = compute_sigma_tilde(np.linspace(-1, 1, 5), post.X[0], post, wd, 0.0)
    np.testing.assert_array_equal(s, 0.0)


def test_negative_denominator_raises():
    gen = np.random.default_rng(8)
    post = random_posterior(gen, n=3)
    wd = random_gaussian_w(gen)
    proj = Projection(post, wd, np.linspace(-1, 1, 3))
    with pytest.raises(DegenerateCandidate):
        proj.sigma_tilde(post.X[0], noise_c=-10.0)


def test_sigma_tilde_squared_is_variance_reduction():
    """Var_n[G(x)] - Var_{n+1}[G(x)] by Gauss-Hermite integration of the posterior covariance."""
    gen = np.random.default_rng(9)
    for _ in range(3):
        wd = random_gaussian_w(gen)
        post = random_posterior(gen, n=4)
        c, lam = gen.uniform(-1, 1, 2), 0.03
        after = post.with_observation(c, 0.0, lam)
        wn, ww = gauss_hermite_w(wd)
        for x in (-0.6, 0.1, 0.8):
            P = np.column_stack([np.full(wn.size, x), wn])
            v0 = ww @ post.cov(P, P) @ ww
            v1 = ww @ after.cov(P, P) @ ww
            s = compute_sigma_tilde([x], c, post, wd, lam)[0]
            assert s ** 2 == pytest.approx(v0 - v1, rel=1e-7)
