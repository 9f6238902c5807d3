"""Experiment configuration files.

A config is one JSON object::

    {
      "schema_version": 1,
      "problem": {"family": "analytic"},
      "algorithms": ["sbo", "kg", "ei"],
      "sbo": {"n0": 5, "N": 40, "M": 10, ...},
      "replications": 30,
      "seed": 0,
      "output": "results/analytic",
      "timing": true,
      "sweep": null
    }

``problem.family`` is one of ``analytic``, ``gp_sampled`` (fields of
GPSampledSpec; ``log_beta`` may replace ``beta``) or ``bikeshare`` (fields of
BikeshareConfig). ``sweep`` maps problem fields to lists of values; the
``sweep`` subcommand runs the Cartesian product. ``seed`` overrides
``sbo.seed``.
"""
import copy
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from ..gp import ContractViolation
from ..problems import BikeshareConfig, GPSampledSpec, analytic_problem, bikeshare_problem, gp_sampled_problem
from ..sbo import SBOConfig

SCHEMA_VERSION = 1
ALGORITHMS = ("sbo", "kg", "ei")
FAMILIES = ("analytic", "gp_sampled", "bikeshare")


class ConfigError(ContractViolation):
    pass


@dataclass
class ExperimentConfig:
    problem: dict = field(default_factory=lambda: {"family": "analytic"})
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    sbo: SBOConfig = field(default_factory=SBOConfig)
    replications: int = 1
    seed: int = 0
    output: str = "results"
    timing: bool = True
    sweep: Optional[dict] = None

    def __post_init__(self):
        if isinstance(self.sbo, dict):
            self.sbo = _sbo_from_dict(self.sbo)
        self.sbo = SBOConfig(**{**asdict(self.sbo), "seed": int(self.seed)})
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.algorithms:
            raise ConfigError("algorithms must be nonempty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {list(ALGORITHMS)}")
        if self.problem.get("family") not in FAMILIES:
            raise ConfigError(f"problem.family must be one of {list(FAMILIES)}")
        if self.sweep is not None:
            if not isinstance(self.sweep, dict) or not self.sweep:
                raise ConfigError("sweep must map problem fields to nonempty lists")
            for k, v in self.sweep.items():
                if not isinstance(v, list) or not v:
                    raise ConfigError(f"sweep values for {k!r} must be a nonempty list")

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "problem": copy.deepcopy(self.problem),
            "algorithms": list(self.algorithms),
            "sbo": asdict(self.sbo),
            "replications": self.replications,
            "seed": self.seed,
            "output": self.output,
            "timing": self.timing,
            "sweep": copy.deepcopy(self.sweep),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except ConfigError:
            raise
        except ContractViolation as err:
            raise ConfigError(f"invalid config: {err}") from err

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, TypeError) as err:
            raise ConfigError(f"invalid config: {err}") from err

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def sweep_points(self):
        """Problem specs of the Cartesian sweep grid, in row-major order."""
        if not self.sweep:
            return [dict(self.problem)]
        keys = list(self.sweep)
        grids = np.meshgrid(*[np.arange(len(self.sweep[k])) for k in keys], indexing="ij")
        out = []
        for idx in zip(*[g.ravel() for g in grids]):
            spec = dict(self.problem)
            spec.update({k: self.sweep[k][i] for k, i in zip(keys, idx)})
            out.append(spec)
        return out


def _sbo_from_dict(d):
    known = {f.name for f in fields(SBOConfig)}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown sbo keys {sorted(extra)}")
    return SBOConfig(**d)


def _fields_only(cls, spec, drop=("family",)):
    known = {f.name for f in fields(cls)}
    extra = set(spec) - known - set(drop)
    if extra:
        raise ConfigError(f"unknown {cls.__name__} fields {sorted(extra)}")
    return {k: v for k, v in spec.items() if k in known}


def build_problem(spec):
    """Problem instance for a ``problem`` section of a config."""
    family = spec.get("family")
    if family == "analytic":
        if set(spec) - {"family"}:
            raise ConfigError("the analytic problem takes no parameters")
        return analytic_problem()
    if family == "gp_sampled":
        spec = dict(spec)
        if "log_beta" in spec:
            if "beta" in spec:
                raise ConfigError("give beta or log_beta, not both")
            spec["beta"] = float(np.exp(spec.pop("log_beta")))
        return gp_sampled_problem(GPSampledSpec(**_fields_only(GPSampledSpec, spec)))
    if family == "bikeshare":
        return bikeshare_problem(BikeshareConfig(**_fields_only(BikeshareConfig, spec)))
    raise ConfigError(f"unknown problem family {family!r}")
