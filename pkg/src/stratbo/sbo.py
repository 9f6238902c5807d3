"""The stratified Bayesian optimization loop.

A run draws ``n0`` first-stage points (x uniform on the domain, w from its
marginal), fits the GP hyperparameters by maximum likelihood, then for ``N``
iterations picks the (x, w) maximizing the value of information, evaluates
the average of ``M`` draws of f(x, w, z) with z ~ p(z | w), and conditions
the GP on the result. The recommendation after each iteration is the point
of the decision grid with the largest posterior mean of G.

The same engine runs the baselines: knowledge gradient is this loop on the
problem with w folded into z, and expected improvement swaps the
acquisition (see ``baselines``).
"""
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import rng as rng_
from .gp import ContractViolation, DesignPoint, Observation, fit_hyperparameters, posterior
from .optimize import candidate_grid, maximize_acquisition
from .quadrature import DiscreteW, Projection
from .voi import Discretization, ValueOfInformation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SBOConfig:
    n0: int = 5
    N: int = 30
    M: int = 10
    restarts: int = 10
    screen: int = 100            # screening points ranked before the local ascents
    grid_per_dim: int = 50       # decision grid A' resolution for box domains
    grid_cap: int = 2500         # maximum size of A'
    seed: int = 0
    refit_every: int = 0         # 0: fit once after the first stage
    fit_restarts: int = 10
    prior_sd: Optional[float] = 2.0    # log length-scale prior sd for a MAP fit; None: plain maximum likelihood
    noise: str = "empirical"     # "empirical": per-point s^2/M; "pooled": mean over the history
    score: bool = True           # record problem.score at each recommendation

    def __post_init__(self):
        if self.n0 < 2:
            raise ContractViolation("n0 must be at least 2")
        if self.N < 0:
            raise ContractViolation("N must be nonnegative")
        if self.M < 2:
            raise ContractViolation("M must be at least 2 to estimate the noise")
        if self.restarts < 1:
            raise ContractViolation("restarts must be positive")
        if self.refit_every < 0:
            raise ContractViolation("refit_every must be nonnegative")
        if self.prior_sd is not None and not self.prior_sd > 0:
            raise ContractViolation("prior_sd must be positive")
        if self.noise not in ("empirical", "pooled"):
            raise ContractViolation(f"unknown noise model {self.noise!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class IterationRecord:
    """State after ``n0 + iteration`` observations, and the next sample chosen from it.

    The final record of a run has no chosen point.
    """
    iteration: int
    recommendation: np.ndarray
    g_value: Optional[float]
    x: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    y: Optional[float] = None
    noise_var: Optional[float] = None
    acquisition: Optional[float] = None
    fallback: bool = False
    wall_ms: float = 0.0


@dataclass
class RunRecord:
    algorithm: str
    replication: int
    first_stage: List[Observation]
    iterations: List[IterationRecord] = field(default_factory=list)
    evaluations: int = 0
    params: object = None
    mu0: float = 0.0

    @property
    def recommendation(self):
        return self.iterations[-1].recommendation

    @property
    def g_values(self):
        return np.array([np.nan if r.g_value is None else r.g_value for r in self.iterations])

    def trajectory(self):
        """Everything except timings, for exact comparisons between runs."""
        out = [(o.point.vector.tolist(), o.y, o.noise_var) for o in self.first_stage]
        for r in self.iterations:
            out.append((r.iteration, r.recommendation.tolist(), r.g_value,
                        None if r.x is None else r.x.tolist(), None if r.w is None else r.w.tolist(),
                        r.y, r.noise_var, r.acquisition, r.fallback))
        return out


def decision_grid(domain, config):
    """The finite set A' over which recommendations and the VOI maximum are taken."""
    if domain.kind == "finite":
        return Discretization(domain.points)
    if domain.kind == "simplex":
        return Discretization.simplex_lattice(domain.dim, domain.total, cap=config.grid_cap)
    return Discretization.grid(domain.lower, domain.upper, per_dim=config.grid_per_dim, cap=config.grid_cap)


def _spans(problem):
    spans = list(problem.domain.spans)
    if problem.wdist is not None:
        lo, hi = problem.wdist.search_box()
        spans.extend(np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float))
    return np.array(spans, dtype=float)


def _model_history(history, mode):
    """Observations as the GP sees them, with the chosen noise model applied."""
    if mode == "empirical":
        return history
    pooled = float(np.mean([o.noise_var for o in history]))
    return [Observation(o.point, o.y, pooled, o.m_samples) for o in history]


def _score(problem, x, config):
    if not config.score:
        return None
    g = problem.score(x)
    return None if g is None else float(g)


def run(problem, config, algorithm="sbo", replication=0, acquisition=None):
    """Generic loop shared by SBO and the baselines.

    ``acquisition(posterior, wdist, grid, noise_c)`` builds the acquisition
    object; the default is the value of information.
    """
    if acquisition is None:
        acquisition = lambda post, wdist, grid, noise_c: ValueOfInformation(post, wdist, grid, noise_c)
    domain = problem.domain
    wdist = problem.wdist
    seed, rep = config.seed, replication
    grid = decision_grid(domain, config)
    spans = _spans(problem)
    x_dim = domain.dim

    history = []
    for i in range(config.n0):
        gen = rng_.stream(seed, rep, rng_.FIRST_STAGE, i)
        x = domain.sample(gen)
        w = wdist.sample(gen) if wdist is not None else np.zeros(0)
        y, s2 = problem.evaluate(x, w, config.M, (seed, rep, rng_.FIRST_STAGE, i, 1))
        history.append(Observation(DesignPoint(x, w), y, s2 / config.M, config.M))
    record = RunRecord(algorithm, rep, list(history), evaluations=config.n0 * config.M)

    def fit(k):
        return fit_hyperparameters(_model_history(history, config.noise), restarts=config.fit_restarts,
                                   seed=rng_.child_seed(seed, rep, k), spans=spans, x_dim=x_dim,
                                   prior_sd=config.prior_sd)

    fitted = fit(0)
    for it in range(config.N + 1):
        t0 = time.perf_counter()
        model = _model_history(history, config.noise)
        post = posterior(fitted.params, fitted.mu0, model)
        a_n = Projection(post, wdist, grid.points).a_n
        rec = grid.points[int(np.argmax(a_n))].copy()
        entry = IterationRecord(it, rec, _score(problem, rec, config))
        if it == config.N:
            entry.wall_ms = 1e3 * (time.perf_counter() - t0)
            record.iterations.append(entry)
            break

        noise_c = float(np.mean([o.noise_var for o in model]))
        acq = acquisition(post, wdist, grid, noise_c)
        res = maximize_acquisition(acq, domain, wdist, restarts=config.restarts,
                                   seed=(seed, rep, rng_.ACQUISITION, it), screen=config.screen)
        point = res.point
        if res.fallback:
            point = _max_variance_point(post, domain, wdist, (seed, rep, rng_.FALLBACK, it), config.screen)
            logger.info("%s iteration %d: zero acquisition surface, sampling the max-variance candidate",
                        algorithm, it)
        x, w = point[:x_dim], point[x_dim:]
        if not domain.contains(x):
            warnings.warn(f"chosen x {x} drifted outside the domain; projecting")
            x = domain.project(x)
        y, s2 = problem.evaluate(x, w, config.M, (seed, rep, rng_.MAIN_STAGE, it))
        obs = Observation(DesignPoint(x, w), y, s2 / config.M, config.M)
        history.append(obs)
        record.evaluations += config.M
        entry.x, entry.w, entry.y, entry.noise_var = x, w, y, obs.noise_var
        entry.acquisition, entry.fallback = res.value, res.fallback
        if config.refit_every and (it + 1) % config.refit_every == 0:
            fitted = fit(it + 1)
        entry.wall_ms = 1e3 * (time.perf_counter() - t0)
        record.iterations.append(entry)

    record.params, record.mu0 = fitted.params, fitted.mu0
    return record


def _max_variance_point(post, domain, wdist, seed, m):
    """Screening candidate with the largest posterior variance of F."""
    gen = rng_.stream(*seed)
    if domain.kind == "finite" and (wdist is None or isinstance(wdist, DiscreteW)):
        C = candidate_grid(domain, wdist)
    else:
        X = domain.sample(gen, m)
        W = wdist.sample(gen, m) if wdist is not None else np.zeros((m, 0))
        C = np.hstack([X, W.reshape(m, -1)])
    return C[int(np.argmax(post.var(C)))].copy()


def run_sbo(problem, config, replication=0):
    """Stratified Bayesian optimization: choose both x and w at every step."""
    return run(problem, config, "sbo", replication)

