"""
Translate a parsed RunConfig into the solver objects: nonlinearity,
coupling, forcing, initial datum and exact solution.
"""

import logging
from typing import Callable, Optional

import numpy as np

from analysis.setup import ExperimentSetup
from cli.expressions import compile_spatial, compile_vector
from config import RunConfig
from errors import ConfigurationError
from nonlinearity.growth import GrowthParams
from nonlinearity.registry import Nonlinearity, get_nonlinearity
from stepper.forcing import Forcing
from stepper.scheme import CouplingMatrix

logger = logging.getLogger(__name__)

FORCING_PRESETS = ("zero", "geostrophic")


def build_nonlinearity(cfg: RunConfig) -> Nonlinearity:
    p = cfg.problem
    params = GrowthParams.from_dict(p.growth, m=p.components, n=1) if p.growth is not None else None
    return get_nonlinearity(p.nonlinearity, params=params, m=p.components)


def build_coupling(cfg: RunConfig) -> CouplingMatrix:
    m = cfg.problem.components
    if cfg.problem.coupling is None:
        return CouplingMatrix.zero(m)
    return CouplingMatrix(np.asarray(cfg.problem.coupling, dtype=float))


def build_forcing(spec: dict, m: int) -> Forcing:
    """Forcing from {preset: zero}, {preset: geostrophic, U, V}, {constant: [...]} or {expr: [...]}."""
    if "expr" in spec:
        exprs = list(spec["expr"])
        if len(exprs) != m:
            raise ConfigurationError(f"Forcing needs {m} expressions, got {len(exprs)}")
        return Forcing.from_expression(compile_vector(exprs), m=m, label="expression")
    if "constant" in spec:
        vec = [float(v) for v in spec["constant"]]
        if len(vec) != m:
            raise ConfigurationError(f"Constant forcing needs {m} entries, got {len(vec)}")
        return Forcing.constant(vec)
    preset = spec.get("preset", "zero")
    if preset == "zero":
        return Forcing.zero(m)
    if preset == "geostrophic":
        if m != 3:
            raise ConfigurationError("The geostrophic preset is a 3-component forcing")
        V, U = float(spec.get("V", 1.0)), float(spec.get("U", 1.0))
        return Forcing.constant([-V, U, 0.0])
    raise ConfigurationError(f"Unknown forcing preset '{preset}' (known: {', '.join(FORCING_PRESETS)})")


def build_initial(spec: dict, m: int) -> Callable[[np.ndarray], np.ndarray]:
    if spec.get("preset") == "zero":
        return lambda xs: np.zeros((len(xs), m))
    exprs = list(spec.get("expr", ["0"] * m))
    if len(exprs) != m:
        raise ConfigurationError(f"Initial datum needs {m} expressions, got {len(exprs)}")
    return compile_spatial(exprs)


def build_exact(cfg: RunConfig) -> Optional[Callable[[float, np.ndarray], np.ndarray]]:
    if not cfg.problem.exact:
        return None
    exprs = list(cfg.problem.exact.get("expr", []))
    if len(exprs) != cfg.problem.components:
        raise ConfigurationError(f"Exact solution needs {cfg.problem.components} expressions")
    return compile_vector(exprs)


def build_setup(cfg: RunConfig) -> ExperimentSetup:
    """Full experiment description; all validation happens here, before any artifact."""
    p, d, e = cfg.problem, cfg.discretization, cfg.ensemble
    setup = ExperimentSetup(
        nonlinearity=build_nonlinearity(cfg),
        coupling=build_coupling(cfg),
        forcing=build_forcing(p.forcing, p.components),
        initial=build_initial(p.initial, p.components),
        K=d.K, N=d.N, T=p.T, domain=tuple(p.domain),
        solver={
            "newton_tol": d.newton_tol, "max_newton_iters": d.max_newton_iters,
            "damping": d.damping, "fallback_fixed_point": d.fallback_fixed_point,
            "max_fixed_point_iters": d.max_fixed_point_iters,
            "time_quad_points": d.time_quad_points,
        },
        M=e.M, epsilon=e.epsilon, seed=e.seed, law=e.law,
        record_times=tuple(e.record_times) if e.record_times else None,
    )
    # fail fast on mesh, scheme and ensemble parameters
    setup.mesh()
    setup.scheme()
    setup.ensemble_config()
    return setup
