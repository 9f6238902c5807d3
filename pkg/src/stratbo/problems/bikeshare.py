"""Synthetic bike-share rush-hour simulator.

Stations sit in clustered synthetic coordinates and are split into groups by
k-means. The decision x is the number of bikes per group at the start of the
horizon, spread evenly over the group's stations. w is the total number of
trip requests, Poisson with mean equal to the sum of the origin-destination
rates. Given w, the OD pairs are multinomial in the rates (the law of
independent Poisson counts given their sum), start times are uniform over the
horizon and durations exponential with a distance-dependent mean.

A trip is negatively affected when its origin is empty, or when its
destination is full; in the latter case the bike is docked at the nearest
station with a free dock. f = -(number of affected trips).
"""
import heapq
from dataclasses import asdict, dataclass

import numpy as np
from scipy.cluster.vq import kmeans2

from .. import rng as rng_
from ..gp import ContractViolation
from ..quadrature import DiscreteW
from .base import Problem, Simplex


@dataclass(frozen=True)
class BikeshareConfig:
    n_stations: int = 64
    n_groups: int = 4
    dock_min: int = 15
    dock_max: int = 35
    budget_fraction: float = 0.5    # bikes as a fraction of total docks
    total_rate: float = 600.0       # expected trip requests over the horizon
    horizon: float = 240.0          # minutes
    base_duration: float = 4.0      # minutes
    minutes_per_km: float = 4.0
    gravity_km: float = 2.5
    seed: int = 0
    scenarios: int = 200            # common-random-number scoring set


class Trips:
    """One realization of z: trips sorted by start time."""
    __slots__ = ("origin", "dest", "start", "duration")

    def __init__(self, origin, dest, start, duration):
        order = np.argsort(start, kind="mergesort")
        self.origin = np.asarray(origin, dtype=np.int64)[order]
        self.dest = np.asarray(dest, dtype=np.int64)[order]
        self.start = np.asarray(start, dtype=float)[order]
        self.duration = np.asarray(duration, dtype=float)[order]

    def __len__(self):
        return self.start.size


def simulate(bikes, docks, trips, nearest, trace=None):
    """Run the rush-hour event simulation and return the affected-trip count.

    ``bikes`` is the initial inventory per station and ``nearest[s]`` lists
    the other stations by increasing distance from s. If ``trace`` is a
    list, (time, docked, in_transit) is appended after every event.
    """
    inv = [int(b) for b in bikes]
    cap = [int(d) for d in docks]
    origin, dest = trips.origin.tolist(), trips.dest.tolist()
    start, dur = trips.start.tolist(), trips.duration.tolist()
    n = len(start)
    riding = []
    affected = 0
    i = 0
    while i < n or riding:
        if riding and (i >= n or riding[0][0] <= start[i]):
            t, _, d = heapq.heappop(riding)
            if inv[d] < cap[d]:
                inv[d] += 1
            else:
                affected += 1
                for k in nearest[d]:
                    if inv[k] < cap[k]:
                        inv[k] += 1
                        break
                else:
                    raise RuntimeError("no free dock anywhere: bikes exceed total docks")
        else:
            t, o = start[i], origin[i]
            if inv[o] > 0:
                inv[o] -= 1
                heapq.heappush(riding, (t + dur[i], i, dest[i]))
            else:
                affected += 1
            i += 1
        if trace is not None:
            trace.append((t, sum(inv), len(riding)))
    return affected


def largest_remainder(values, total):
    """Nonnegative integers summing to ``total`` closest to ``values``."""
    v = np.maximum(np.asarray(values, dtype=float), 0.0)
    v = v * (total / v.sum()) if v.sum() > 0 else np.full(v.size, total / v.size)
    base = np.floor(v).astype(int)
    short = int(total - base.sum())
    order = np.argsort(-(v - base), kind="mergesort")
    base[order[:short]] += 1
    return base


class BikeshareProblem(Problem):
    name = "bikeshare"

    def __init__(self, coords, docks, groups, rates, budget, horizon=240.0,
                 base_duration=4.0, minutes_per_km=4.0, seed=0, scenarios=200, config=None):
        self.coords = np.asarray(coords, dtype=float)
        self.docks = np.asarray(docks, dtype=int)
        self.groups = np.asarray(groups, dtype=int)
        self.rates = np.asarray(rates, dtype=float)
        self.n_stations = self.docks.size
        self.n_groups = int(self.groups.max()) + 1
        self.budget = int(budget)
        if self.budget > self.docks.sum():
            raise ContractViolation("budget exceeds total dock capacity")
        self.horizon = float(horizon)
        self.seed = seed
        self.n_scenarios = scenarios
        self._config = config

        dist = np.sqrt(((self.coords[:, None, :] - self.coords[None, :, :]) ** 2).sum(-1))
        self.nearest = [[int(k) for k in np.argsort(dist[s], kind="mergesort") if k != s]
                        for s in range(self.n_stations)]
        self.mean_duration = base_duration + minutes_per_km * dist
        self.total_rate = float(self.rates.sum())
        self._pair_p = (self.rates / self.total_rate).ravel() if self.total_rate > 0 else None
        self.members = [np.flatnonzero(self.groups == g) for g in range(self.n_groups)]
        self.domain = Simplex(self.n_groups, self.budget)
        self.wdist = DiscreteW.poisson(self.total_rate) if self.total_rate > 0 else DiscreteW([0.0], [1.0])
        self.day_multiplier = 1.0
        self._scenarios = None
        self._scores = {}

    @classmethod
    def synthetic(cls, config=None):
        cfg = config or BikeshareConfig()
        gen = rng_.stream(cfg.seed, rng_.PROBLEM, 0)
        G = cfg.n_groups
        centers = 6.0 * np.array([[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, G, endpoint=False)])
        share = np.linspace(1.6, 0.6, G)
        share /= share.sum()
        cluster = gen.choice(G, size=cfg.n_stations, p=share)
        coords = centers[cluster] + gen.normal(0.0, 1.2, size=(cfg.n_stations, 2))
        docks = gen.integers(cfg.dock_min, cfg.dock_max + 1, size=cfg.n_stations)
        # morning commute: the first half of the clusters mostly produce trips, the rest attract them
        residential = cluster < G // 2
        produce = np.where(residential, 3.0, 0.7) * gen.lognormal(0.0, 0.3, cfg.n_stations)
        attract = np.where(residential, 0.7, 3.0) * gen.lognormal(0.0, 0.3, cfg.n_stations)
        dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
        rates = np.outer(produce, attract) * np.exp(-dist / cfg.gravity_km)
        np.fill_diagonal(rates, 0.0)
        rates *= cfg.total_rate / rates.sum()
        _, groups = kmeans2(coords, G, seed=rng_.stream(cfg.seed, rng_.PROBLEM, 1), minit="++")
        groups = _relabel(groups)
        budget = int(round(cfg.budget_fraction * docks.sum()))
        return cls(coords, docks, groups, rates, budget, horizon=cfg.horizon,
                   base_duration=cfg.base_duration, minutes_per_km=cfg.minutes_per_km,
                   seed=cfg.seed, scenarios=cfg.scenarios, config=cfg)

    # -- allocation ---------------------------------------------------------

    def group_totals(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_groups,) or not self.domain.contains(x):
            raise ContractViolation(f"allocation {x} is not on the simplex sum = {self.budget}")
        return largest_remainder(x, self.budget)

    def allocate(self, x):
        """Bikes per station: equal split within each group, capped by docks.

        Overflow a group cannot hold goes to the nearest stations (to the
        group's first station) with free docks.
        """
        bikes = np.zeros(self.n_stations, dtype=int)
        spill = 0
        for g, total in enumerate(self.group_totals(x)):
            members = self.members[g]
            left = int(total)
            while left > 0:
                room = members[bikes[members] < self.docks[members]]
                if room.size == 0:
                    break
                k = min(left, room.size)
                bikes[room[:k]] += 1
                left -= k
            spill += left
        if spill:
            for s in range(self.n_stations):
                take = min(spill, self.docks[s] - bikes[s])
                bikes[s] += take
                spill -= take
                if spill == 0:
                    break
        return bikes

    # -- randomness ---------------------------------------------------------

    def sample_z_given_w(self, w, gen):
        n = int(round(float(np.asarray(w).reshape(-1)[0])))
        if n == 0 or self._pair_p is None:
            return Trips([], [], [], [])
        counts = gen.multinomial(n, self._pair_p)
        pairs = np.repeat(np.arange(counts.size), counts)
        o, d = np.divmod(pairs, self.n_stations)
        start = gen.uniform(0.0, self.horizon, size=n)
        dur = gen.exponential(self.mean_duration[o, d])
        return Trips(o, d, start, dur)

    def f(self, x, w, z):
        return -float(simulate(self.allocate(x), self.docks, z, self.nearest))

    # -- scoring ------------------------------------------------------------

    def scenarios(self):
        if self._scenarios is None:
            out = []
            for k in range(self.n_scenarios):
                gen = rng_.stream(self.seed, rng_.PROBLEM, 2, k)
                w = self.wdist.sample(gen)
                out.append(self.sample_z_given_w(w, gen))
            self._scenarios = out
        return self._scenarios

    def score(self, x):
        """Mean f over the fixed common-random-number scenario set."""
        key = tuple(self.group_totals(x).tolist())
        if key not in self._scores:
            bikes = self.allocate(x)
            self._scores[key] = -float(np.mean([simulate(bikes, self.docks, z, self.nearest)
                                                 for z in self.scenarios()]))
        return self._scores[key]

    def uniform_allocation(self):
        return np.full(self.n_groups, self.budget / self.n_groups)

    def config(self):
        cfg = {"family": self.name}
        if self._config is not None:
            cfg.update(asdict(self._config))
        return cfg


def _relabel(groups):
    """Renumber cluster labels by first appearance so labels are stable."""
    mapping = {}
    for g in groups:
        mapping.setdefault(int(g), len(mapping))
    return np.array([mapping[int(g)] for g in groups])


def bikeshare_problem(config=None):
    return BikeshareProblem.synthetic(config)
