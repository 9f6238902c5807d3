"""Synthetic problems f(x, w, z) = h(x, w) + g(z) with h drawn from a GP.

h lives on the 50 x 50 grid of [0, 1]^2 and is sampled once per instance
from a zero-mean GP with covariance alpha_h exp(-beta |(x,w) - (x',w')|^2).
The kernel is separable, so h = Lx Z Lw^T with one Cholesky factor per axis.
g(z) is fresh N(0, alpha_d) noise on every evaluation, w is uniform on the
50 grid values and z uniform on [0, 1]. Var[f | w, z] is normalized to
alpha_h + alpha_d = 1 and ``A_ratio`` = alpha_h.
"""
from dataclasses import dataclass

import numpy as np

from .. import rng as rng_
from ..gp import ContractViolation, _factor
from ..quadrature import DiscreteW
from .base import FiniteSet, Problem

GRID = 50


@dataclass(frozen=True)
class GPSampledSpec:
    A_ratio: float = 0.5
    beta: float = float(np.exp(4.0))
    seed: int = 0
    grid: int = GRID

    def __post_init__(self):
        if not 0.0 < self.A_ratio <= 1.0:
            raise ContractViolation("A_ratio must lie in (0, 1]")
        if not self.beta > 0:
            raise ContractViolation("beta must be positive")

    @property
    def alpha_h(self):
        return self.A_ratio

    @property
    def alpha_d(self):
        return 1.0 - self.A_ratio


def _axis_factor(t, beta):
    K = np.exp(-beta * (t[:, None] - t[None, :]) ** 2)
    L, _ = _factor(K, np.zeros(len(t)), 1.0)
    return L


class GPSampledProblem(Problem):
    name = "gp_sampled"

    def __init__(self, spec):
        self.spec = spec
        t = np.linspace(0.0, 1.0, spec.grid)
        self.grid = t
        self.domain = FiniteSet(t)
        self.wdist = DiscreteW.uniform(t)
        L = _axis_factor(t, spec.beta)
        Z = rng_.stream(spec.seed, rng_.PROBLEM).standard_normal((spec.grid, spec.grid))
        self.h = np.sqrt(spec.alpha_h) * (L @ Z @ L.T)
        self.h.setflags(write=False)
        self._G = self.h.mean(axis=1)

    def _index(self, v):
        i = int(np.rint(float(v) * (self.spec.grid - 1)))
        if not 0 <= i < self.spec.grid or abs(self.grid[i] - float(v)) > 1e-9:
            raise ContractViolation(f"{v} is not a grid value")
        return i

    def f(self, x, w, z):
        u, noise = z
        return self.h[self._index(x[0]), self._index(w[0])] + noise

    def sample_z_given_w(self, w, gen):
        u = gen.random()
        noise = gen.normal(0.0, np.sqrt(self.spec.alpha_d)) if self.spec.alpha_d > 0 else 0.0
        return u, noise

    def oracle_G(self, x):
        return float(self._G[self._index(np.asarray(x).reshape(-1)[0])])

    def config(self):
        return {"family": self.name, "A_ratio": self.spec.A_ratio, "beta": self.spec.beta, "seed": self.spec.seed}


def gp_sampled_problem(spec):
    return GPSampledProblem(spec)
