import numpy as np
import pytest

from stratbo.baselines import ExpectedImprovement, expected_improvement
from stratbo.gp import DesignPoint, KernelParams, Observation, posterior
from stratbo.voi import Discretization

from _support import central_diff


def _posterior(noise=0.01, seed=0):
    gen = np.random.default_rng(seed)
    hist = [Observation(DesignPoint([x], []), float(np.sin(4 * x) + 0.1 * gen.normal()), noise)
            for x in gen.uniform(-1, 1, 6)]
    return posterior(KernelParams(1.0, [3.0], []), 0.0, hist)


def test_ei_closed_form_matches_monte_carlo():
    gen = np.random.default_rng(1)
    z = gen.standard_normal(1_000_000)
    for _ in range(20):
        m, s, best = gen.normal(), gen.uniform(0.05, 2), gen.normal()
        samples = np.maximum(m + s * z - best, 0.0)
        se = samples.std(ddof=1) / np.sqrt(z.size)
        # the floor covers candidates deep in the tail, where no draw improves
        assert abs(expected_improvement([m], [s], best)[0] - samples.mean()) < 4 * se + 1e-9


def test_ei_zero_variance_is_plain_improvement():
    np.testing.assert_allclose(expected_improvement([1.0, -1.0], [0.0, 0.0], 0.0), [1.0, 0.0])


def test_ei_vanishes_at_known_incumbent():
    params = KernelParams(1.0, [3.0], [])
    vals = []
    for noise in (1e-2, 1e-4, 1e-8):
        hist = [Observation(DesignPoint([x], []), float(np.sin(3 * x)), noise) for x in np.linspace(-1, 1, 9)]
        post = posterior(params, 0.0, hist)
        grid = Discretization(np.linspace(-1, 1, 9))
        ei = ExpectedImprovement(post, grid)
        best = grid.points[np.argmax(post.mean(grid.points))]
        vals.append(ei.value(best))
    assert all(v >= 0 for v in vals)
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-3


def test_ei_gradient_fd():
    post = _posterior()
    ei = ExpectedImprovement(post, Discretization(np.linspace(-1, 1, 41)))
    for c in (-0.73, -0.2, 0.35, 0.9):
        v, g = ei.value_and_grad(np.array([c]))
        assert v == pytest.approx(ei.value([c]), rel=1e-12)
        fd = central_diff(ei.value, np.array([c]))
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-10)


def test_incumbent_is_max_posterior_mean_over_grid():
    post = _posterior()
    grid = Discretization(np.linspace(-1, 1, 21))
    assert ExpectedImprovement(post, grid).incumbent == pytest.approx(post.mean(grid.points).max())
