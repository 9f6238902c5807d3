"""Gaussian-process regression on the joint (x, w) input space.

The prior is a constant mean plus a squared-exponential kernel with separate
inverse squared length scales for the x block and the w block. All points are
handled internally as rows ``[x, w]`` of a 2-d array.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from . import rng as rng_

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
NOISE_FLOOR = 1e-12
LOG_BOUND = 10.0


class ContractViolation(ValueError):
    """An argument broke an operation's precondition (shape, sign, range)."""


class FactorizationError(LinAlgError):
    """A covariance matrix stayed indefinite after the full jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    sigma0_sq: float
    alpha_x: np.ndarray
    alpha_w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_x", np.atleast_1d(np.asarray(self.alpha_x, dtype=float)))
        object.__setattr__(self, "alpha_w", np.asarray(self.alpha_w, dtype=float).reshape(-1))
        if not self.sigma0_sq > 0:
            raise ContractViolation(f"sigma0_sq must be positive, got {self.sigma0_sq}")
        if np.any(self.alpha_x <= 0) or np.any(self.alpha_w <= 0):
            raise ContractViolation("inverse squared length scales must be positive")

    @property
    def x_dim(self):
        return self.alpha_x.size

    @property
    def w_dim(self):
        return self.alpha_w.size

    @property
    def alpha(self):
        """All inverse squared length scales, x block first."""
        return np.concatenate([self.alpha_x, self.alpha_w])


@dataclass(frozen=True)
class DesignPoint:
    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(-1))

    @property
    def vector(self):
        return np.concatenate([self.x, self.w])


@dataclass(frozen=True)
class Observation:
    """One averaged evaluation: ``y`` is the mean of ``m_samples`` draws and
    ``noise_var`` the variance of that mean."""
    point: DesignPoint
    y: float
    noise_var: float
    m_samples: int = 2

    def __post_init__(self):
        if self.noise_var < 0:
            raise ContractViolation(f"noise_var must be nonnegative, got {self.noise_var}")
        if self.m_samples < 1:
            raise ContractViolation("m_samples must be positive")


def _as_rows(points, dim):
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p.reshape(1, -1)
    if p.shape[1] != dim:
        raise ContractViolation(f"expected points of dimension {dim}, got {p.shape[1]}")
    return p


def kernel_matrix(params, P, Q):
    """Squared-exponential covariance between the rows of ``P`` and ``Q``."""
    alpha = params.alpha
    P = _as_rows(P, alpha.size)
    Q = _as_rows(Q, alpha.size)
    s = np.sqrt(alpha)
    Ps, Qs = P * s, Q * s
    d2 = (Ps ** 2).sum(1)[:, None] + (Qs ** 2).sum(1)[None, :] - 2.0 * Ps @ Qs.T
    np.maximum(d2, 0.0, out=d2)
    return params.sigma0_sq * np.exp(-d2)


def _check_point(params, p):
    if p.x.size != params.x_dim or p.w.size != params.w_dim:
        raise ContractViolation(
            f"point has dims ({p.x.size}, {p.w.size}), kernel expects ({params.x_dim}, {params.w_dim})")


def kernel_eval(params, p, q):
    """Sigma_0(p, q) for two design points."""
    _check_point(params, p)
    _check_point(params, q)
    d = p.vector - q.vector
    return params.sigma0_sq * np.exp(-np.dot(params.alpha, d * d))


def kernel_grad_candidate(params, candidate, other):
    """Gradient of Sigma_0(candidate, other) with respect to the candidate's
    coordinates, x block first. Zero when the two points coincide."""
    _check_point(params, candidate)
    _check_point(params, other)
    d = candidate.vector - other.vector
    k = params.sigma0_sq * np.exp(-np.dot(params.alpha, d * d))
    return -2.0 * params.alpha * d * k


def kernel_grad_rows(params, c, P):
    """Vectorized ``kernel_grad_candidate``: returns (k, dk) with ``k[i] =
    Sigma_0(c, P[i])`` and ``dk[i, :]`` its gradient in ``c``."""
    alpha = params.alpha
    diff = c[None, :] - P
    k = params.sigma0_sq * np.exp(-(diff * diff) @ alpha)
    return k, -2.0 * alpha[None, :] * diff * k[:, None]


def _stack_history(history, x_dim=None, w_dim=None):
    if len(history) == 0:
        return np.zeros((0, (x_dim or 0) + (w_dim or 0))), np.zeros(0), np.zeros(0)
    X = np.array([o.point.vector for o in history], dtype=float)
    y = np.array([o.y for o in history], dtype=float)
    noise = np.array([o.noise_var for o in history], dtype=float)
    return X, y, noise


def _factor(K, noise, scale):
    """Cholesky of K + diag(noise) + jitter*I with escalating jitter."""
    n = K.shape[0]
    jitter = JITTER_START * scale
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        A = K + np.diag(noise) + jitter * np.eye(n)
        try:
            return cholesky(A, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"covariance of {n} points not positive definite with jitter up to {JITTER_MAX:g}*sigma0^2; "
        "the design is too ill-conditioned")


class GPPosterior:
    """Immutable posterior of the GP on F given a history.

    ``chol`` is the lower Cholesky factor of A_n and ``alpha_vec`` solves
    A_n a = y - mu0. With an empty history both have size zero and every
    query falls back to the prior.
    """

    def __init__(self, params, mu0, X, y, noise, chol, jitter):
        self.params = params
        self.mu0 = float(mu0)
        self.X = X
        self.y = y
        self.noise = noise
        self.chol = chol
        self.jitter = jitter
        self.alpha_vec = cho_solve((chol, True), y - self.mu0) if len(y) else np.zeros(0)
        for arr in (self.X, self.y, self.noise, self.chol, self.alpha_vec):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.y.size

    @property
    def dim(self):
        return self.params.alpha.size

    def solve(self, v):
        """A_n^{-1} v."""
        if self.n == 0:
            return np.zeros_like(v)
        return cho_solve((self.chol, True), v)

    def half_solve(self, v):
        """L^{-1} v, so that v^T A_n^{-1} u = (L^{-1}v)^T (L^{-1}u)."""
        return solve_triangular(self.chol, v, lower=True)

    def cross(self, P):
        """Prior covariances between query rows and training points, shape (m, n)."""
        return kernel_matrix(self.params, P, self.X) if self.n else np.zeros((_as_rows(P, self.dim).shape[0], 0))

    def mean(self, P):
        P = _as_rows(P, self.dim)
        return self.mu0 + self.cross(P) @ self.alpha_vec

    def cov(self, P, Q):
        P = _as_rows(P, self.dim)
        Q = _as_rows(Q, self.dim)
        prior = kernel_matrix(self.params, P, Q)
        if self.n == 0:
            return prior
        return prior - self.half_solve(self.cross(P).T).T @ self.half_solve(self.cross(Q).T)

    def var(self, P):
        """Posterior variance at each row, clamped at zero."""
        P = _as_rows(P, self.dim)
        v = np.full(P.shape[0], self.params.sigma0_sq)
        if self.n:
            V = self.half_solve(self.cross(P).T)
            v = v - (V * V).sum(0)
        return np.maximum(v, 0.0)

    def with_observation(self, point, y, noise_var):
        """Posterior after appending one observation (refactorized from scratch)."""
        X = np.vstack([self.X, np.asarray(point, dtype=float).reshape(1, -1)])
        return _build(self.params, self.mu0, X, np.append(self.y, y), np.append(self.noise, noise_var))


def _build(params, mu0, X, y, noise):
    if len(y) == 0:
        return GPPosterior(params, mu0, np.zeros((0, params.alpha.size)), np.zeros(0), np.zeros(0),
                           np.zeros((0, 0)), 0.0)
    K = kernel_matrix(params, X, X)
    chol, jitter = _factor(K, noise, params.sigma0_sq)
    return GPPosterior(params, mu0, X, y, noise, chol, jitter)


def posterior(prior, mu0, history, noise_floor=NOISE_FLOOR):
    """Condition the GP prior on ``history`` (a sequence of Observation).

    Noise variances below ``noise_floor * sigma0_sq`` are raised to it; pass
    ``noise_floor=0`` for declared-noiseless data.
    """
    X, y, noise = _stack_history(history, prior.x_dim, prior.w_dim)
    if len(y):
        X = _as_rows(X, prior.alpha.size)
    noise = np.maximum(noise, noise_floor * prior.sigma0_sq)
    return _build(prior, mu0, X, y, noise)


def posterior_from_arrays(prior, mu0, X, y, noise, noise_floor=NOISE_FLOOR):
    X = np.asarray(X, dtype=float).reshape(len(y), prior.alpha.size)
    noise = np.maximum(np.asarray(noise, dtype=float), noise_floor * prior.sigma0_sq)
    return _build(prior, mu0, X, np.asarray(y, dtype=float), noise)


# --------------------------------------------------------------------------
# maximum likelihood


class FitResult(NamedTuple):
    params: KernelParams
    mu0: float
    log_likelihood: float
    fallback: bool = False


def _unpack(theta, x_dim, y_scale, spans):
    sigma0_sq = y_scale * np.exp(theta[0])
    alpha = np.exp(theta[1:]) / spans ** 2
    return KernelParams(sigma0_sq, alpha[:x_dim], alpha[x_dim:])


def _pack(params, y_scale, spans):
    return np.concatenate([[np.log(params.sigma0_sq / y_scale)], np.log(params.alpha * spans ** 2)])


def log_marginal_likelihood(params, X, y, noise, mu0=None, grad=False, jitter=1e-8):
    """Gaussian log marginal likelihood of ``y``.

    With ``mu0=None`` the constant mean is profiled out at its GLS optimum.
    With ``grad=True`` also returns the gradient with respect to
    (log sigma0_sq, log alpha_1, ..., log alpha_D); by the envelope theorem it
    does not depend on whether mu0 was profiled. Returns (ll, mu0[, grad]).
    """
    n = y.size
    alpha = params.alpha
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2
    K = params.sigma0_sq * np.exp(-diff2 @ alpha)
    A = K + np.diag(noise) + jitter * params.sigma0_sq * np.eye(n)
    L = cholesky(A, lower=True, check_finite=False)
    if mu0 is None:
        ones = np.ones(n)
        Ai1 = cho_solve((L, True), ones)
        mu0 = float(Ai1 @ y / (Ai1 @ ones))
    r = y - mu0
    a = cho_solve((L, True), r)
    ll = -0.5 * r @ a - np.log(np.diag(L)).sum() - 0.5 * n * np.log(2 * np.pi)
    if not grad:
        return ll, mu0
    W = np.outer(a, a) - cho_solve((L, True), np.eye(n))
    g = np.empty(1 + alpha.size)
    g[0] = 0.5 * np.sum(W * K)
    for k in range(alpha.size):
        g[1 + k] = 0.5 * np.sum(W * (K * (-alpha[k] * diff2[:, :, k])))
    return ll, mu0, g


def fit_hyperparameters(history, restarts=10, seed=0, spans=None, x_dim=None, prior_sd=None):
    """Maximum-likelihood (or MAP) kernel parameters and constant mean.

    The search runs in log-parameter space on the box [-10, 10]^(1+D), where
    the signal variance is measured relative to the sample variance of y and
    each inverse squared length scale relative to ``1/spans**2``. One restart
    starts at the box centre and the rest at seeded random points.

    ``x_dim`` says how many leading coordinates belong to x (default: all of
    a DesignPoint's x). With ``prior_sd`` set, each scaled log inverse squared
    length scale gets an independent N(0, prior_sd^2) prior and the fit is
    the posterior mode; this keeps length scales finite when a handful of
    points cannot identify them.
    """
    if len(history) < 2:
        raise ContractViolation("fit_hyperparameters needs at least 2 observations")
    X, y, noise = _stack_history(history)
    if x_dim is None:
        x_dim = history[0].point.x.size
    D = X.shape[1]
    if spans is None:
        spans = np.ptp(X, axis=0)
    spans = np.where(np.asarray(spans, dtype=float) > 0, spans, 1.0)
    spans = np.broadcast_to(spans, (D,)).astype(float)

    y_var = float(np.var(y))
    if y_var == 0.0 and np.all(noise == 0.0):
        logger.warning("degenerate history: constant noiseless responses, using fallback kernel")
        return FitResult(KernelParams(1e-6, np.ones(x_dim), np.ones(D - x_dim)), float(y[0]), np.nan, True)
    y_scale = y_var if y_var > 0 else float(np.mean(noise))

    def objective(theta):
        params = _unpack(theta, x_dim, y_scale, spans)
        try:
            ll, _, g = log_marginal_likelihood(params, X, y, noise, grad=True)
        except LinAlgError:
            return 1e25, np.zeros_like(theta)
        if prior_sd is not None:
            ll = ll - 0.5 * np.sum(theta[1:] ** 2) / prior_sd ** 2
            g = g.copy()
            g[1:] -= theta[1:] / prior_sd ** 2
        return -ll, -g

    gen = rng_.stream(seed, rng_.FIT)
    starts = [np.zeros(1 + D)]
    for _ in range(max(restarts, 1) - 1):
        starts.append(np.clip(gen.normal(0.0, 2.0, size=1 + D), -LOG_BOUND, LOG_BOUND))
    bounds = [(-LOG_BOUND, LOG_BOUND)] * (1 + D)

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, res.fun
    if best_theta is None:
        logger.warning("all likelihood restarts failed, using fallback kernel")
        return FitResult(KernelParams(1e-6, np.ones(x_dim), np.ones(D - x_dim)), float(np.mean(y)), np.nan, True)
    params = _unpack(best_theta, x_dim, y_scale, spans)
    ll, mu0 = log_marginal_likelihood(params, X, y, noise)
    return FitResult(params, mu0, ll, False)
