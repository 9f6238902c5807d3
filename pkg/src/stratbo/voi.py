"""Value of information over a discretized decision set.

V_n(c) = E[max_l a_n(x_l) + s_l(c) Z] - max_l a_n(x_l), with s(c) the
vector of sigma-tilde loadings at candidate c. The expectation is exact: the
lines a_l + s_l z are sorted by slope, reduced to their upper envelope, and
integrated piece by piece against the standard normal.
"""
import itertools
import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .gp import ContractViolation, DesignPoint
from .quadrature import DegenerateCandidate, Projection

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _pdf(z):
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


@njit(cache=True)
def _f_neg(t):
    """f(-t) for t >= 0, where f(z) = pdf(z) + z cdf(z)."""
    if t > 8.0:
        r = 1.0 / (t * t)
        return _pdf(t) * r * (1.0 - 3.0 * r + 15.0 * r * r)
    return _pdf(t) - t * 0.5 * math.erfc(t / _SQRT2)


@njit(cache=True)
def _envelope(a, b, order, kept, cs):
    """Upper envelope of lines a_i + b_i z visited in ``order`` (ascending b).

    Fills kept[:m] with line indices and cs[:m] with the z at which each kept
    line takes over (cs[0] = -inf). Equal slopes keep the larger intercept.
    Returns m.
    """
    m = 0
    for i in order:
        z = -np.inf
        skip = False
        while m > 0:
            j = kept[m - 1]
            if b[i] == b[j]:
                if a[i] >= a[j]:
                    m -= 1
                    continue
                skip = True
                break
            z = (a[j] - a[i]) / (b[i] - b[j])
            if z <= cs[m - 1]:
                m -= 1
                continue
            break
        if skip:
            continue
        if m == 0:
            z = -np.inf
        kept[m] = i
        cs[m] = z
        m += 1
    return m


@njit(cache=True)
def _h_rows(a, B):
    out = np.zeros(B.shape[0])
    L = a.shape[0]
    kept = np.empty(L, dtype=np.int64)
    cs = np.empty(L)
    for r in range(B.shape[0]):
        b = B[r]
        order = np.argsort(b, kind="mergesort")
        m = _envelope(a, b, order, kept, cs)
        v = 0.0
        for k in range(1, m):
            v += (b[kept[k]] - b[kept[k - 1]]) * _f_neg(abs(cs[k]))
        out[r] = v
    return out


def f_neg(t):
    return _f_neg(float(t))


def compute_h(a, b):
    """E[max_i a_i + b_i Z] - max_i a_i for Z standard normal.

    Returns (value, kept_indices, breakpoints): the indices of the lines on
    the upper envelope in order of increasing slope, and the z values where
    consecutive kept lines intersect.
    """
    a = np.ascontiguousarray(a, dtype=float).reshape(-1)
    b = np.ascontiguousarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape or a.size == 0:
        raise ContractViolation("a and b must be nonempty and of equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ContractViolation("compute_h needs finite inputs")
    kept = np.empty(a.size, dtype=np.int64)
    cs = np.empty(a.size)
    m = _envelope(a, b, np.argsort(b, kind="mergesort"), kept, cs)
    kept, cs = kept[:m].copy(), cs[1:m].copy()
    value = sum((b[kept[k + 1]] - b[kept[k]]) * _f_neg(abs(cs[k])) for k in range(m - 1))
    return max(float(value), 0.0), kept, cs


def h_batch(a, B):
    """compute_h(a, B[r]) for every row of B, values only."""
    a = np.ascontiguousarray(a, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    return np.maximum(_h_rows(a, B), 0.0)


class Discretization:
    """The finite set A' of x values over which the maximum is taken."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 1:
            raise ContractViolation("a discretization needs at least one point")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ContractViolation("discretization points must be distinct")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def grid(cls, lower, upper, per_dim=50, cap=2500):
        """Uniform tensor grid, shrinking ``per_dim`` until the size is within ``cap``."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        d = lower.size
        k = per_dim
        while k > 1 and k ** d > cap:
            k -= 1
        axes = [np.linspace(lo, hi, k) for lo, hi in zip(lower, upper)]
        return cls(np.array(list(itertools.product(*axes))))

    @classmethod
    def simplex_lattice(cls, dim, total, cap=2500):
        """Points total * (k_1, ..., k_dim) / K with nonnegative integer k summing to K,
        using the largest K whose lattice fits within ``cap``."""
        K = 1
        while math.comb(K + 1 + dim - 1, dim - 1) <= cap:
            K += 1
        pts = [np.array(c, dtype=float) for c in _compositions(K, dim)]
        return cls(np.array(pts) * (total / K))


def _compositions(K, dim):
    if dim == 1:
        yield (K,)
        return
    for first in range(K + 1):
        for rest in _compositions(K - first, dim - 1):
            yield (first,) + rest


class VOIResult(NamedTuple):
    value: float
    kept_indices: np.ndarray
    breakpoints: np.ndarray
    gradient: np.ndarray


class ValueOfInformation:
    """V_n and its gradient for a fixed posterior, decision set and noise level.

    ``noise_c`` is the observation noise variance expected at a new sample.
    Construction caches everything that does not depend on the candidate.
    """

    def __init__(self, posterior, wdist, disc, noise_c=0.0):
        points = disc.points if isinstance(disc, Discretization) else np.asarray(disc, dtype=float)
        self.projection = Projection(posterior, wdist, points)
        self.posterior = posterior
        self.noise_c = float(noise_c)
        self.a = np.ascontiguousarray(self.projection.a_n)
        self.dim = posterior.params.alpha.size

    def evaluate(self, candidate, grad=True):
        c = candidate.vector if isinstance(candidate, DesignPoint) else np.asarray(candidate, dtype=float)
        zero = np.zeros(self.dim)
        try:
            if grad:
                s, ds = self.projection.sigma_tilde_grad(c, self.noise_c)
            else:
                s = self.projection.sigma_tilde(c, self.noise_c)
        except DegenerateCandidate:
            return VOIResult(0.0, np.zeros(0, dtype=np.int64), np.zeros(0), zero)
        value, kept, cs = compute_h(self.a, s)
        if not grad or kept.size < 2:
            return VOIResult(value if kept.size > 1 else 0.0, kept, cs, zero)
        weights = np.array([_pdf(abs(c_)) for c_ in cs])
        g = ((ds[kept[1:]] - ds[kept[:-1]]) * weights[:, None]).sum(0)
        return VOIResult(value, kept, cs, g)

    def value(self, candidate):
        return self.evaluate(candidate, grad=False).value

    def value_and_grad(self, c):
        r = self.evaluate(c)
        return r.value, r.gradient

    def values(self, C):
        """V_n at each row of C."""
        try:
            S = self.projection.sigma_tilde_batch(C, self.noise_c)
        except DegenerateCandidate:
            return np.array([self.value(c) for c in np.asarray(C, dtype=float)])
        return h_batch(self.a, S)


def compute_voi(candidate, disc, posterior, wdist, noise_c=0.0):
    """Value of information of sampling at ``candidate``, with gradient."""
    return ValueOfInformation(posterior, wdist, disc, noise_c).evaluate(candidate)
