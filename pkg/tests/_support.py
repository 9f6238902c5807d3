"""Shared random fixtures for the tests."""
import numpy as np

from stratbo.gp import DesignPoint, KernelParams, Observation, posterior
from stratbo.quadrature import DiscreteW, GaussianW


def random_params(gen, x_dim=1, w_dim=1):
    return KernelParams(float(gen.uniform(0.5, 2.0)), gen.uniform(0.3, 3.0, x_dim), gen.uniform(0.3, 3.0, w_dim))


def random_gaussian_w(gen, w_dim=1):
    return GaussianW(gen.uniform(-0.5, 0.5, w_dim), gen.uniform(0.3, 1.5, w_dim))


def random_discrete_w(gen, atoms=7):
    support = np.sort(gen.uniform(-2, 2, atoms))
    return DiscreteW(support, gen.dirichlet(np.ones(atoms)))


def random_posterior(gen, n=4, x_dim=1, w_dim=1, noise=(1e-3, 0.05), params=None):
    params = params or random_params(gen, x_dim, w_dim)
    hist = [Observation(DesignPoint(gen.uniform(-1, 1, x_dim), gen.uniform(-1.5, 1.5, w_dim)),
                        float(gen.normal()), float(gen.uniform(*noise)))
            for _ in range(n)]
    return posterior(params, float(gen.normal(0, 0.3)), hist)


def central_diff(f, x, h=1e-6):
    """Central finite differences of a scalar or vector valued f; shape (out..., len(x))."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def gauss_hermite_w(wdist, nodes=200):
    """Nodes and weights integrating against a 1-d Gaussian w law."""
    t, wt = np.polynomial.hermite_e.hermegauss(nodes)
    m, v = float(wdist.means[0]), float(wdist.variances[0])
    return m + np.sqrt(v) * t, wt / wt.sum()
