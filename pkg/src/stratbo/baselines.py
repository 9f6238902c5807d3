"""Knowledge-gradient and expected-improvement baselines.

Both model G(x) directly: the GP lives on x alone and every evaluation
draws w from its marginal together with z. Knowledge gradient is exactly the
SBO loop on that marginalized problem. Expected improvement uses the same
loop, fit and budget with a different acquisition.
"""
import numpy as np
from scipy.special import ndtr

from .gp import kernel_grad_rows
from .problems.base import Marginalized
from .sbo import run

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _marginalized(problem):
    return problem if problem.wdist is None else Marginalized(problem)


def run_kg(problem, config, replication=0):
    """Knowledge gradient: the value of information over x with w treated as noise."""
    return run(_marginalized(problem), config, "kg", replication)


def expected_improvement(mean, sd, incumbent):
    """E[(G - incumbent)^+] for G ~ N(mean, sd^2), elementwise."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    delta = mean - incumbent
    out = np.maximum(delta, 0.0)
    pos = sd > 0
    u = delta[pos] / sd[pos]
    out[pos] = delta[pos] * ndtr(u) + sd[pos] * _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    return out


class ExpectedImprovement:
    """EI over the plug-in incumbent max_{x in A'} of the posterior mean."""

    def __init__(self, posterior, grid):
        self.posterior = posterior
        points = getattr(grid, "points", grid)
        self.incumbent = float(np.max(posterior.mean(points)))

    def values(self, C):
        C = np.asarray(C, dtype=float).reshape(-1, self.posterior.dim)
        return expected_improvement(self.posterior.mean(C), np.sqrt(self.posterior.var(C)), self.incumbent)

    def value(self, c):
        return float(self.values(c)[0])

    def value_and_grad(self, c):
        p = self.posterior
        c = np.asarray(c, dtype=float)
        if p.n:
            k, dk = kernel_grad_rows(p.params, c, p.X)
            mean = p.mu0 + k @ p.alpha_vec
            Ak = p.solve(k)
            var = p.params.sigma0_sq - k @ Ak
            dmean = dk.T @ p.alpha_vec
            dvar = -2.0 * dk.T @ Ak
        else:
            mean, var = p.mu0, p.params.sigma0_sq
            dmean = dvar = np.zeros(c.size)
        delta = mean - self.incumbent
        if var <= 0:
            return max(delta, 0.0), (dmean if delta > 0 else np.zeros(c.size))
        sd = np.sqrt(var)
        u = delta / sd
        cdf, pdf = ndtr(u), _INV_SQRT_2PI * np.exp(-0.5 * u * u)
        value = delta * cdf + sd * pdf
        return float(value), cdf * dmean + pdf * dvar / (2.0 * sd)


def run_ei(problem, config, replication=0):
    """Expected improvement on a GP over x, with the same fit and budget as SBO."""
    return run(_marginalized(problem), config, "ei", replication,
               acquisition=lambda post, wdist, grid, noise_c: ExpectedImprovement(post, grid))
