"""Domains and the black-box problem interface."""
from abc import ABC, abstractmethod

import numpy as np
from scipy.stats import qmc

from .. import rng as rng_
from ..gp import ContractViolation


def as_generator(seed):
    """Accept a Generator, an int seed, or a tuple of stream keys."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return rng_.stream(*seed)
    return rng_.stream(seed)


class Box:
    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape or np.any(self.upper < self.lower):
            raise ContractViolation("box bounds must have equal shape with lower <= upper")

    kind = "box"

    @property
    def dim(self):
        return self.lower.size

    @property
    def spans(self):
        return self.upper - self.lower

    def sample(self, gen, size=None):
        n = 1 if size is None else size
        u = gen.random((n, self.dim))
        pts = self.lower + u * self.spans
        return pts[0] if size is None else pts

    def lhs(self, gen, n):
        u = qmc.LatinHypercube(d=self.dim, seed=gen).random(n)
        return self.lower + u * self.spans

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x):
        return np.clip(x, self.lower, self.upper)


class Simplex:
    """{x >= 0, sum(x) = total}."""
    kind = "simplex"

    def __init__(self, dim, total):
        self.dim = int(dim)
        self.total = float(total)
        self.lower = np.zeros(self.dim)
        self.upper = np.full(self.dim, self.total)

    @property
    def spans(self):
        return self.upper - self.lower

    def sample(self, gen, size=None):
        n = 1 if size is None else size
        pts = gen.dirichlet(np.ones(self.dim), size=n) * self.total
        return pts[0] if size is None else pts

    def lhs(self, gen, n):
        # uniform on the simplex via sorted LHS spacings
        u = np.sort(qmc.LatinHypercube(d=self.dim - 1, seed=gen).random(n), axis=1)
        edges = np.hstack([np.zeros((n, 1)), u, np.ones((n, 1))])
        return np.diff(edges, axis=1) * self.total

    def contains(self, x, tol=1e-6):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol * self.total) and abs(x.sum() - self.total) <= tol * self.total)

    def project(self, x):
        """Euclidean projection onto the simplex."""
        v = np.asarray(x, dtype=float) / self.total
        u = np.sort(v)[::-1]
        css = np.cumsum(u) - 1.0
        k = np.arange(1, v.size + 1)
        rho = np.nonzero(u - css / k > 0)[0][-1]
        theta = css[rho] / (rho + 1.0)
        return np.maximum(v - theta, 0.0) * self.total


class FiniteSet:
    """A finite list of allowed x values."""
    kind = "finite"

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        self.points = pts[:, None] if pts.ndim == 1 else pts
        self.lower = self.points.min(0)
        self.upper = self.points.max(0)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def spans(self):
        return self.upper - self.lower

    def sample(self, gen, size=None):
        idx = gen.integers(len(self.points), size=1 if size is None else size)
        pts = self.points[idx]
        return pts[0] if size is None else pts

    def lhs(self, gen, n):
        return self.sample(gen, n)

    def contains(self, x, tol=1e-9):
        d = np.abs(self.points - np.asarray(x, dtype=float)[None, :]).max(1)
        return bool(d.min() <= tol)

    def project(self, x):
        d = ((self.points - np.asarray(x, dtype=float)[None, :]) ** 2).sum(1)
        return self.points[int(np.argmin(d))].copy()


class Problem(ABC):
    """Black box f(x, w, z) with a known marginal law for w.

    Subclasses define ``domain``, ``wdist``, ``f`` and ``sample_z_given_w``.
    ``evaluate`` returns the mean of M draws and their unbiased sample
    variance; it is a pure function of its arguments.
    """
    name = "problem"
    domain = None
    wdist = None

    @property
    def x_dim(self):
        return self.domain.dim

    @property
    def w_dim(self):
        return 0 if self.wdist is None else self.wdist.dim

    @abstractmethod
    def f(self, x, w, z):
        ...

    @abstractmethod
    def sample_z_given_w(self, w, gen):
        ...

    def sample_w(self, seed):
        return self.wdist.sample(as_generator(seed))

    def evaluate(self, x, w, M, seed):
        if M < 1:
            raise ContractViolation("M must be positive")
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float).reshape(-1)
        if not self.domain.contains(x):
            raise ContractViolation(f"x={x} outside the domain")
        gen = as_generator(seed)
        vals = np.array([self.f(x, w, self.sample_z_given_w(w, gen)) for _ in range(M)], dtype=float)
        return float(vals.mean()), float(vals.var(ddof=1)) if M > 1 else 0.0

    def oracle_G(self, x):
        """Exact objective value, or None when unavailable."""
        return None

    def score(self, x):
        """Objective value used to grade recommendations."""
        return self.oracle_G(x)

    def config(self):
        return {"family": self.name}


class Marginalized(Problem):
    """View of a problem with every component of w moved into z.

    Each inner sample draws its own (w, z) from the joint law, so the view
    has no controllable w. Used by the baselines, which model G directly.
    """

    def __init__(self, base):
        self.base = base
        self.name = base.name
        self.domain = base.domain
        self.wdist = None

    def f(self, x, w, z):
        return self.base.f(x, z[0], z[1])

    def sample_z_given_w(self, w, gen):
        wb = self.base.wdist.sample(gen)
        return wb, self.base.sample_z_given_w(wb, gen)

    def oracle_G(self, x):
        return self.base.oracle_G(x)

    def score(self, x):
        return self.base.score(x)

    def config(self):
        return self.base.config()
