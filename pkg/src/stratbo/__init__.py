"""Stratified Bayesian optimization.

Optimizes G(x) = E[f(x, w, z)] for a simulator whose random input splits
into an influential, observable part w with known law and a remainder z.
A Gaussian process models F(x, w) = E[f | w]; G is its integral against
p(w), and each sample (x, w) is chosen to maximize the one-step value of
information about max_x G.
"""
from .baselines import ExpectedImprovement, expected_improvement, run_ei, run_kg
from .gp import (ContractViolation, DesignPoint, FactorizationError, FitResult, GPPosterior, KernelParams,
                 Observation, fit_hyperparameters, log_marginal_likelihood, posterior)
from .optimize import AcquisitionResult, maximize_acquisition
from .quadrature import (DegenerateCandidate, DiscreteW, GaussianW, Projection, compute_a_n, compute_B,
                         compute_sigma_tilde, gaussian_moment, grad_sigma_tilde)
from .sbo import IterationRecord, RunRecord, SBOConfig, run, run_sbo
from .voi import Discretization, ValueOfInformation, compute_h, compute_voi, h_batch

__version__ = "0.1.0"
