from .analytic import AnalyticProblem, analytic_problem
from .base import Box, FiniteSet, Marginalized, Problem, Simplex
from .bikeshare import BikeshareConfig, BikeshareProblem, bikeshare_problem, simulate
from .gp_sampled import GPSampledProblem, GPSampledSpec, gp_sampled_problem
