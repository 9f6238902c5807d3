"""Multi-start maximization of an acquisition function over x-domain x w-range.

An acquisition object provides ``values(C)`` for a batch of candidates and
``value_and_grad(c)`` for one. Finite x with discrete (or no) w is solved by
enumeration. Otherwise a Latin-hypercube screening set ranks starting points
and the best ``restarts`` of them are polished by a bounded quasi-Newton
ascent (SLSQP on the simplex). Discrete w is relaxed during the ascent and
rounded to the nearest atom afterwards.
"""
import logging
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .problems.base import as_generator
from .quadrature import DiscreteW

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 20000


class AcquisitionResult(NamedTuple):
    point: np.ndarray
    value: float
    fallback: bool


def _w_box(wdist):
    if wdist is None:
        return np.zeros(0), np.zeros(0)
    lo, hi = wdist.search_box()
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def candidate_grid(x_domain, wdist):
    """All (x, w) pairs for a finite x-domain and discrete or absent w."""
    X = x_domain.points
    if wdist is None:
        return X.copy()
    W = wdist.support
    return np.hstack([np.repeat(X, len(W), axis=0), np.tile(W, (len(X), 1))])


def _screen_set(x_domain, wdist, gen, m):
    dx = x_domain.dim
    lo_w, hi_w = _w_box(wdist)
    dw = lo_w.size
    if x_domain.kind == "box":
        u = qmc.LatinHypercube(d=dx + dw, seed=gen).random(m)
        X = x_domain.lower + u[:, :dx] * x_domain.spans
        W = lo_w + u[:, dx:] * (hi_w - lo_w)
    else:
        X = x_domain.lhs(gen, m)
        W = lo_w + qmc.LatinHypercube(d=dw, seed=gen).random(m) * (hi_w - lo_w) if dw else np.zeros((m, 0))
    if isinstance(wdist, DiscreteW):
        W = np.array([wdist.nearest_atom(w) for w in W])
    return np.hstack([X, W])


def _finalize(point, x_domain, wdist):
    dx = x_domain.dim
    x, w = point[:dx], point[dx:]
    px = x_domain.project(x)
    if np.max(np.abs(px - x), initial=0.0) > 1e-6 * max(1.0, np.max(x_domain.spans)):
        # an unconverged SLSQP run can end off the simplex; the projected point is re-scored by the caller
        logger.debug("local ascent left the domain by %.3g; projected back", np.max(np.abs(px - x)))
    if isinstance(wdist, DiscreteW):
        w = wdist.nearest_atom(w)
    elif wdist is not None:
        lo, hi = _w_box(wdist)
        w = np.clip(w, lo, hi)
    return np.concatenate([px, w])


def _ascend(acq, start, x_domain, wdist, scale):
    """Local ascent from ``start`` in coordinates normalized to the unit box."""
    dx = x_domain.dim
    lo_w, hi_w = _w_box(wdist)
    lo = np.concatenate([x_domain.lower, lo_w])
    span = np.concatenate([x_domain.spans, hi_w - lo_w])
    span = np.where(span > 0, span, 1.0)

    def objective(u):
        v, g = acq.value_and_grad(lo + u * span)
        return -v / scale, -g * span / scale

    u0 = np.clip((start - lo) / span, 0.0, 1.0)
    bounds = [(0.0, 1.0)] * u0.size
    if x_domain.kind == "simplex":
        # x/total lies on the unit simplex: sum of the first dx coordinates is 1
        cons = [{"type": "eq", "fun": lambda u: u[:dx].sum() - 1.0,
                 "jac": lambda u: np.concatenate([np.ones(dx), np.zeros(u.size - dx)])}]
        res = minimize(objective, u0, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"maxiter": 100, "ftol": 1e-10})
    else:
        res = minimize(objective, u0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 200})
    return lo + np.clip(res.x, 0.0, 1.0) * span


def maximize_acquisition(acq, x_domain, wdist=None, restarts=10, seed=0, screen=100):
    """Best candidate found for ``acq`` over the domain; deterministic given ``seed``.

    When every evaluated value is zero the surface carries no information and
    a uniformly sampled point is returned with ``fallback=True``.
    """
    gen = as_generator(seed)
    if x_domain.kind == "finite":
        if wdist is not None and not isinstance(wdist, DiscreteW):
            raise NotImplementedError("finite x-domains need a discrete or absent w")
        C = candidate_grid(x_domain, wdist)
        if len(C) <= ENUMERATION_CAP:
            vals = acq.values(C)
            i = int(np.argmax(vals))
            if vals[i] > 0:
                return AcquisitionResult(C[i].copy(), float(vals[i]), False)
            return _fallback(x_domain, wdist, gen)

    C = _screen_set(x_domain, wdist, gen, max(screen, restarts))
    vals = acq.values(C)
    order = np.argsort(-vals, kind="mergesort")
    best_i = int(order[0])
    best_point, best_val = C[best_i].copy(), float(vals[best_i])
    if x_domain.kind != "finite" and best_val > 0:
        for i in order[:restarts]:
            if vals[i] <= 0:
                break
            try:
                p = _finalize(_ascend(acq, C[i], x_domain, wdist, best_val), x_domain, wdist)
            except (ValueError, FloatingPointError, np.linalg.LinAlgError) as err:
                logger.debug("local ascent from start %d failed: %s", i, err)
                continue
            v = float(acq.values(p[None, :])[0])
            if v > best_val:
                best_point, best_val = p, v
    if best_val <= 0:
        return _fallback(x_domain, wdist, gen)
    return AcquisitionResult(best_point, best_val, False)


def _fallback(x_domain, wdist, gen):
    x = x_domain.sample(gen)
    w = wdist.sample(gen) if wdist is not None else np.zeros(0)
    logger.info("acquisition surface is identically zero; sampling a uniform fallback point")
    return AcquisitionResult(np.concatenate([x, w]), 0.0, True)
