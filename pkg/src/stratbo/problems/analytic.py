"""The one-dimensional analytic test problem.

f(x, w, z) = z x^2 + w on x in [-1/2, 1/2], with w ~ N(0, 1) and
z ~ N(-1, 1) independent, so F(x, w) = -x^2 + w and G(x) = -x^2.
"""
import numpy as np

from ..quadrature import GaussianW
from .base import Box, Problem


class AnalyticProblem(Problem):
    name = "analytic"

    def __init__(self):
        self.domain = Box([-0.5], [0.5])
        self.wdist = GaussianW([0.0], [1.0])

    def f(self, x, w, z):
        return z * x[0] ** 2 + w[0]

    def sample_z_given_w(self, w, gen):
        return gen.normal(-1.0, 1.0)

    def oracle_G(self, x):
        return -float(np.asarray(x, dtype=float).reshape(-1)[0]) ** 2


def analytic_problem():
    return AnalyticProblem()
