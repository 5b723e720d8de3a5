"""
Run configuration files

A run config is YAML with the sections

    domain:      kind (disk | rectangle | torus), radius or bounds [x0, x1, y0, y1]
    grid:        nx, ny
    fields:      lambda, tau, mu (expression strings or numbers)
    quadrature:  nodes
    solver:      tolerance, max_iterations, armijo_c, backtrack, min_step,
                 linear_tolerance, obstruction_tolerance, curl_tolerance
    minimality:  trials, modes, amplitude
    dirichlet:   boundary, H
    output:      path
    seed:        unsigned integer

Unknown keys are rejected. Omitted keys take the defaults in config.py.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import yaml

from config import (
    DEFAULT_SEED, MINIMALITY_TRIALS, PERTURBATION_AMPLITUDE, PERTURBATION_MODES, SIMPSON_NODES,
)
from exceptions import ParseError, ValidationError
from expression_parser import parse_expression
from killing_model import KillingModel
from minimal_solver import SolverConfig
from scalar_fields import Domain2D
from utils import check_output_path

logger = logging.getLogger(__name__)

_SECTIONS = {
    "domain": {"kind", "radius", "bounds"},
    "grid": {"nx", "ny"},
    "fields": {"lambda", "tau", "mu"},
    "quadrature": {"nodes"},
    "solver": {"tolerance", "max_iterations", "armijo_c", "backtrack", "min_step",
               "linear_tolerance", "obstruction_tolerance", "curl_tolerance"},
    "minimality": {"trials", "modes", "amplitude"},
    "dirichlet": {"boundary", "H"},
    "output": {"path"},
    "seed": None,
}

_INTEGER_KEYS = {"nx", "ny", "nodes", "max_iterations", "trials", "modes"}


@dataclass(frozen=True)
class MinimalityConfig:
    trials: int = MINIMALITY_TRIALS
    modes: int = PERTURBATION_MODES
    amplitude: float = PERTURBATION_AMPLITUDE


@dataclass(frozen=True)
class DirichletConfig:
    boundary: str = "0"
    H: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    kind: str
    nx: int
    ny: int
    radius: float = None
    bounds: tuple = None
    lam: str = "1"
    tau: str = "0"
    mu: str = "1"
    quadrature_nodes: int = SIMPSON_NODES
    solver: SolverConfig = field(default_factory=SolverConfig)
    minimality: MinimalityConfig = field(default_factory=MinimalityConfig)
    dirichlet: DirichletConfig = field(default_factory=DirichletConfig)
    output: str = None
    seed: int = DEFAULT_SEED

    def domain(self):
        return Domain2D(self.kind, self.nx, self.ny, radius=self.radius, bounds=self.bounds)

    def with_overrides(self, seed=None, tolerance=None, output=None):
        """Copy with command-line options applied on top of the file"""
        config = self
        if seed is not None:
            config = replace(config, seed=_seed(seed))
        if tolerance is not None:
            config = replace(config, solver=replace(config.solver, tolerance=float(tolerance)))
        if output is not None:
            config = replace(config, output=check_output_path(output))
        return config

    def summary(self):
        return {
            "domain": {"kind": self.kind, "radius": self.radius,
                       "bounds": list(self.bounds) if self.bounds else None},
            "grid": {"nx": self.nx, "ny": self.ny},
            "fields": {"lambda": self.lam, "tau": self.tau, "mu": self.mu},
            "seed": self.seed,
        }


def _seed(value):
    value = _number("seed", value, integer=True)
    if value < 0:
        raise ValidationError("seed", "must be an unsigned integer")
    return value


def _number(key, value, integer=False):
    if isinstance(value, bool):
        raise ValidationError(key, "expected a number")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError(key, f"expected a number, got {value!r}")
    if not math.isfinite(number):
        raise ValidationError(key, "must be finite")
    if integer:
        if number != int(number):
            raise ValidationError(key, "expected an integer")
        return int(number)
    return number


def _expression(key, value):
    """Expression text of a field, parsed once so syntax errors surface here"""
    text = str(value)
    expression = parse_expression(text)
    name = key.split(".")[-1]
    if name in ("lambda", "mu") and not expression.free_symbols:
        if not float(expression) > 0:
            raise ValidationError(key, f"{name} must be positive")
    return text


def _check_keys(data):
    if not isinstance(data, dict):
        raise ValidationError("config", "expected a mapping of sections")
    for section, value in data.items():
        if section not in _SECTIONS:
            raise ValidationError(str(section), "unknown section")
        allowed = _SECTIONS[section]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ValidationError(section, "expected a mapping")
        for key in value:
            if key not in allowed:
                raise ValidationError(f"{section}.{key}", "unknown key")


def parse_config(text):
    """Parse and validate YAML config text into a RunConfig"""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        if mark is not None:
            raise ParseError(problem, position=mark.index, line=mark.line + 1, column=mark.column + 1)
        raise ParseError(problem)
    if data is None:
        data = {}
    _check_keys(data)

    def section(name):
        return data.get(name) or {}

    domain = section("domain")
    if "kind" not in domain:
        raise ValidationError("domain.kind", "missing")
    grid = section("grid")
    for key in ("nx", "ny"):
        if key not in grid:
            raise ValidationError(f"grid.{key}", "missing")

    values = {
        "kind": str(domain["kind"]),
        "nx": _number("grid.nx", grid["nx"], integer=True),
        "ny": _number("grid.ny", grid["ny"], integer=True),
    }
    if "radius" in domain:
        values["radius"] = _number("domain.radius", domain["radius"])
    if "bounds" in domain:
        bounds = domain["bounds"]
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 4:
            raise ValidationError("domain.bounds", "expected [x0, x1, y0, y1]")
        values["bounds"] = tuple(_number("domain.bounds", b) for b in bounds)

    fields = section("fields")
    for key, attribute in (("lambda", "lam"), ("tau", "tau"), ("mu", "mu")):
        if key in fields:
            values[attribute] = _expression(f"fields.{key}", fields[key])

    if "nodes" in section("quadrature"):
        values["quadrature_nodes"] = _number("quadrature.nodes", data["quadrature"]["nodes"], integer=True)

    solver = {key: _number(f"solver.{key}", value, integer=key in _INTEGER_KEYS)
              for key, value in section("solver").items()}
    values["solver"] = SolverConfig(**solver)

    minimality = {key: _number(f"minimality.{key}", value, integer=key in _INTEGER_KEYS)
                  for key, value in section("minimality").items()}
    values["minimality"] = MinimalityConfig(**minimality)
    if values["minimality"].trials < 1 or values["minimality"].modes < 1:
        raise ValidationError("minimality", "trials and modes must be >= 1")

    dirichlet = section("dirichlet")
    values["dirichlet"] = DirichletConfig(
        boundary=_expression("dirichlet.boundary", dirichlet.get("boundary", "0")),
        H=_number("dirichlet.H", dirichlet.get("H", 0.0)),
    )

    if "path" in section("output"):
        values["output"] = check_output_path(str(data["output"]["path"]))
    if "seed" in data:
        values["seed"] = _seed(data["seed"])

    config = RunConfig(**values)
    config.domain()
    logger.debug(f"Parsed config: {config.summary()}")
    return config


def load_config(path):
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except FileNotFoundError:
        raise ValidationError("config", f"file {path} not found")
    return parse_config(text)


def build_model(config):
    """KillingModel described by a RunConfig (torus models come without a connection)"""
    return KillingModel(config.domain(), config.lam, config.tau, config.mu,
                        quadrature_nodes=config.quadrature_nodes)
