"""Bayesian quadrature: project the GP on F(x, w) onto G(x) = E[F(x, w)].

The central quantity is the kernel mean

    B(x, i) = integral of Sigma_0(x, w, x_i, w_i) p(w) dw,

which factorizes for the squared-exponential kernel into an x part and a
w part that depends only on w_i. Gaussian w components get the closed-form
moment; discrete w is summed exactly.
"""
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .gp import ContractViolation, DesignPoint, kernel_grad_rows

DEGENERATE_TOL = 1e-8


class DegenerateCandidate(ArithmeticError):
    """The candidate's predictive variance is negative: the factorization is broken."""


def gaussian_moment(alpha, center, mean, variance):
    """E[exp(-alpha (W - center)^2)] for W ~ N(mean, variance). Vectorized."""
    alpha, center, mean, variance = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                                          for a in (alpha, center, mean, variance)))
    if np.any(variance <= 0):
        raise ContractViolation("variance must be positive")
    if np.any(alpha < 0):
        raise ContractViolation("alpha must be nonnegative")
    # completing the square; this arrangement avoids cancelling large exponents at small variance
    r = 1.0 + 2.0 * alpha * variance
    out = np.exp(-alpha * (center - mean) ** 2 / r) / np.sqrt(r)
    return out if out.ndim else float(out)


def gaussian_moment_dcenter(alpha, center, mean, variance):
    """Derivative of ``gaussian_moment`` with respect to ``center``."""
    m = gaussian_moment(alpha, center, mean, variance)
    return m * (-2.0 * alpha * (center - mean) / (1.0 + 2.0 * alpha * variance))


@dataclass(frozen=True)
class GaussianW:
    """Independent Gaussian components."""
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.atleast_1d(np.asarray(self.means, dtype=float)))
        object.__setattr__(self, "variances", np.atleast_1d(np.asarray(self.variances, dtype=float)))
        if self.means.shape != self.variances.shape:
            raise ContractViolation("means and variances must have equal length")
        if np.any(self.variances <= 0):
            raise ContractViolation("Gaussian w variances must be positive")

    @property
    def dim(self):
        return self.means.size

    def sample(self, gen, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.means + np.sqrt(self.variances) * gen.standard_normal(shape)

    def search_box(self, width=6.0):
        sd = np.sqrt(self.variances)
        return self.means - width * sd, self.means + width * sd

    def kernel_mean(self, alpha_w, W):
        """prod_k E[exp(-alpha_k (w_k - W[i, k])^2)] for each row of W."""
        W = np.asarray(W, dtype=float).reshape(-1, self.dim)
        return np.prod(gaussian_moment(alpha_w[None, :], W, self.means[None, :], self.variances[None, :]), axis=1)

    def kernel_mean_grad(self, alpha_w, w):
        """Gradient of ``kernel_mean`` at a single point w."""
        m = gaussian_moment(alpha_w, w, self.means, self.variances)
        dm = gaussian_moment_dcenter(alpha_w, w, self.means, self.variances)
        g = np.empty(self.dim)
        for k in range(self.dim):
            g[k] = dm[k] * np.prod(np.delete(m, k))
        return g


@dataclass(frozen=True)
class DiscreteW:
    """Finite support ``support`` (m x d) with probabilities ``probs``."""
    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (support.shape[0],):
            raise ContractViolation("probs must have one entry per support atom")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ContractViolation("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def truncated(cls, support, weights):
        w = np.asarray(weights, dtype=float)
        return cls(support, w / w.sum())

    @classmethod
    def poisson(cls, lam, tail=1e-8):
        """Poisson(lam) truncated to its central 1 - 2*tail mass, renormalized."""
        lo = int(stats.poisson.ppf(tail, lam))
        hi = int(stats.poisson.ppf(1.0 - tail, lam))
        k = np.arange(lo, hi + 1)
        return cls.truncated(k.astype(float), stats.poisson.pmf(k, lam))

    @classmethod
    def uniform(cls, atoms):
        atoms = np.asarray(atoms, dtype=float)
        return cls(atoms, np.full(len(atoms), 1.0 / len(atoms)))

    @classmethod
    def gaussian_quantiles(cls, mean, variance, atoms=400):
        """Equal-mass atoms at the midpoint quantiles of a 1-d Gaussian."""
        u = (np.arange(atoms) + 0.5) / atoms
        return cls.uniform(mean + np.sqrt(variance) * stats.norm.ppf(u))

    @property
    def dim(self):
        return self.support.shape[1]

    def sample(self, gen, size=None):
        idx = gen.choice(len(self.probs), size=size, p=self.probs)
        return self.support[idx]

    def search_box(self, width=None):
        return self.support.min(0), self.support.max(0)

    def nearest_atom(self, w):
        d = ((self.support - np.asarray(w, dtype=float)[None, :]) ** 2).sum(1)
        return self.support[int(np.argmin(d))]

    def kernel_mean(self, alpha_w, W):
        W = np.asarray(W, dtype=float).reshape(-1, self.dim)
        d2 = ((self.support[None, :, :] - W[:, None, :]) ** 2) @ alpha_w
        return np.exp(-d2) @ self.probs

    def kernel_mean_grad(self, alpha_w, w):
        diff = self.support - np.asarray(w, dtype=float)[None, :]
        e = self.probs * np.exp(-(diff ** 2) @ alpha_w)
        return 2.0 * alpha_w * (e @ diff)


def _w_factor(params, wdist, W):
    if params.w_dim == 0:
        return np.ones(W.shape[0])
    return wdist.kernel_mean(params.alpha_w, W)


def quad_matrix(params, wdist, xs, P):
    """B[l, i] = integral Sigma_0(xs[l], w, P[i]) p(w) dw, shape (L, m)."""
    dx = params.x_dim
    xs = np.asarray(xs, dtype=float).reshape(-1, dx)
    P = np.asarray(P, dtype=float).reshape(-1, params.alpha.size)
    diff = xs[:, None, :] - P[None, :, :dx]
    Kx = params.sigma0_sq * np.exp(-(diff ** 2) @ params.alpha_x)
    return Kx * _w_factor(params, wdist, P[:, dx:])[None, :]


def compute_B(x, i, posterior, wdist, candidate=None):
    """B(x, i) for training index ``i`` (0-based), or for the candidate when
    ``i == posterior.n``."""
    n = posterior.n
    if not 0 <= i <= n:
        raise ContractViolation(f"index {i} out of range for {n} training points plus candidate")
    if i == n:
        if candidate is None:
            raise ContractViolation("index n refers to the candidate, which was not given")
        p = candidate.vector if isinstance(candidate, DesignPoint) else np.asarray(candidate, dtype=float)
    else:
        p = posterior.X[i]
    return float(quad_matrix(posterior.params, wdist, np.atleast_1d(x), p)[0, 0])


class Projection:
    """Quantities over a fixed set of x points that depend only on the posterior.

    Caches B over the training points and its product with A_n^{-1}, so that
    each candidate costs O(L n + n^2).
    """

    def __init__(self, posterior, wdist, xs):
        self.posterior = posterior
        self.wdist = wdist
        self.params = posterior.params
        self.xs = np.asarray(xs, dtype=float).reshape(-1, self.params.x_dim)
        if posterior.n:
            self.B_train = quad_matrix(self.params, wdist, self.xs, posterior.X)
            self.BA = posterior.solve(self.B_train.T).T
        else:
            self.B_train = np.zeros((self.xs.shape[0], 0))
            self.BA = self.B_train
        self.a_n = posterior.mu0 + self.B_train @ posterior.alpha_vec

    def _denominator(self, gamma, noise_c):
        p = self.posterior
        quad = gamma @ p.solve(gamma) if p.n else 0.0
        return self.params.sigma0_sq + noise_c - quad

    def _degenerate(self, denom):
        tol = DEGENERATE_TOL * self.params.sigma0_sq
        if denom < -tol:
            raise DegenerateCandidate(f"candidate predictive variance {denom:.3g} is negative")
        return denom <= tol

    def sigma_tilde(self, c, noise_c=0.0):
        c = np.asarray(c, dtype=float)
        p = self.posterior
        gamma = p.cross(c)[0]
        denom = self._denominator(gamma, noise_c)
        if self._degenerate(denom):
            return np.zeros(self.xs.shape[0])
        B_c = quad_matrix(self.params, self.wdist, self.xs, c)[:, 0]
        return (B_c - self.BA @ gamma) / np.sqrt(denom)

    def sigma_tilde_grad(self, c, noise_c=0.0):
        """Returns (sigma_tilde, gradient) with gradient shape (L, D)."""
        c = np.asarray(c, dtype=float)
        p, params = self.posterior, self.params
        dx = params.x_dim
        L, D = self.xs.shape[0], params.alpha.size
        if p.n:
            gamma, dgamma = kernel_grad_rows(params, c, p.X)
            Ag = p.solve(gamma)
        else:
            gamma, dgamma, Ag = np.zeros(0), np.zeros((0, D)), np.zeros(0)
        denom = params.sigma0_sq + noise_c - gamma @ Ag
        if self._degenerate(denom):
            return np.zeros(L), np.zeros((L, D))

        B_c = quad_matrix(params, self.wdist, self.xs, c)[:, 0]
        dB = np.empty((L, D))
        dB[:, :dx] = 2.0 * params.alpha_x[None, :] * (self.xs - c[None, :dx]) * B_c[:, None]
        if D > dx:
            wf = self.wdist.kernel_mean(params.alpha_w, c[dx:])[0]
            dlog = self.wdist.kernel_mean_grad(params.alpha_w, c[dx:]) / wf
            dB[:, dx:] = B_c[:, None] * dlog[None, :]

        num = B_c - self.BA @ gamma                      # beta_2
        dnum = dB - self.BA @ dgamma                     # beta_3
        ddenom = -2.0 * dgamma.T @ Ag                    # beta_5 - beta_4, beta_5 = 0
        inv_sqrt = denom ** -0.5                         # beta_1
        st = num * inv_sqrt
        grad = dnum * inv_sqrt - 0.5 * inv_sqrt ** 3 * num[:, None] * ddenom[None, :]
        return st, grad

    def sigma_tilde_batch(self, C, noise_c=0.0):
        """sigma_tilde for many candidates at once, shape (m, L)."""
        C = np.asarray(C, dtype=float).reshape(-1, self.params.alpha.size)
        p = self.posterior
        B_c = quad_matrix(self.params, self.wdist, self.xs, C)   # (L, m)
        if p.n:
            G = p.cross(C).T                                     # (n, m)
            V = p.half_solve(G)
            denom = self.params.sigma0_sq + noise_c - (V * V).sum(0)
            num = B_c - self.BA @ G
        else:
            denom = np.full(C.shape[0], self.params.sigma0_sq + noise_c)
            num = B_c
        tol = DEGENERATE_TOL * self.params.sigma0_sq
        if np.any(denom < -tol):
            raise DegenerateCandidate("negative predictive variance in candidate batch")
        ok = denom > tol
        out = np.zeros_like(num)
        out[:, ok] = num[:, ok] / np.sqrt(denom[ok])
        return out.T



def compute_a_n(x, posterior, wdist):
    """Posterior mean of G at each row of ``x``."""
    return Projection(posterior, wdist, x).a_n


def compute_sigma_tilde(x, candidate, posterior, wdist, noise_c=0.0):
    """Signed loading of the one-step update of a_n(x) on a standard normal.

    ``noise_c`` is the observation noise variance expected at the candidate.
    """
    c = candidate.vector if isinstance(candidate, DesignPoint) else candidate
    return Projection(posterior, wdist, x).sigma_tilde(c, noise_c)


def grad_sigma_tilde(x, candidate, posterior, wdist, noise_c=0.0):
    """Gradient of ``compute_sigma_tilde`` in the candidate coordinates, shape (L, D)."""
    c = candidate.vector if isinstance(candidate, DesignPoint) else candidate
    return Projection(posterior, wdist, x).sigma_tilde_grad(c, noise_c)[1]
