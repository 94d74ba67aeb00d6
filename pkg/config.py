"""
Central configuration loader.
Reads .env for runtime overrides and platform_config.yaml for solver defaults.
Run configurations are loaded from scenarios/*.yaml (or any YAML path).
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from dotenv import load_dotenv

from errors import ConfigurationError

logger = logging.getLogger(__name__)

VERSION = "0.4.0"

# Project root
ROOT_DIR = Path(__file__).parent
SCENARIOS_DIR = ROOT_DIR / "scenarios"
PLATFORM_CONFIG_PATH = ROOT_DIR / "platform_config.yaml"

# Load .env (local dev)
load_dotenv(ROOT_DIR / ".env")


@dataclass
class AppConfig:
    """Runtime settings from the environment."""

    log_level: str = "info"
    threads: int = 1
    output_dir: str = "runs"

    @classmethod
    def from_env(cls) -> "AppConfig":
        def _int(key: str, default: int = 0) -> int:
            val = os.getenv(key, "")
            return int(val) if val.strip() else default

        return cls(
            log_level=os.getenv("FBP_LOG_LEVEL", "info"),
            threads=max(1, _int("FBP_THREADS", 1)),
            output_dir=os.getenv("FBP_OUTPUT_DIR", "runs"),
        )


def load_platform_config() -> dict:
    """Load platform_config.yaml. Returns empty dict if absent."""
    if not PLATFORM_CONFIG_PATH.exists():
        return {}
    with open(PLATFORM_CONFIG_PATH, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def get_solver_defaults() -> dict:
    """Nonlinear solver settings used when a run config leaves them out."""
    defaults = {
        "newton_tol": 1e-10,
        "max_newton_iters": 50,
        "damping": 0.5,
        "fallback_fixed_point": True,
        "max_fixed_point_iters": 500,
        "time_quad_points": 4,
    }
    defaults.update(load_platform_config().get("solver", {}))
    return defaults


def get_quadrature_points() -> int:
    """Gauss points per element for spatial integrals."""
    return int(load_platform_config().get("quadrature", {}).get("points", 2))


def get_ensemble_defaults() -> dict:
    defaults = {"law": "uniform", "record_fractions": [0.0, 0.25, 0.5, 0.75, 1.0]}
    defaults.update(load_platform_config().get("ensemble", {}))
    return defaults


def get_analysis_config() -> dict:
    """Tolerances and strides for the verification instruments."""
    defaults = {
        "rounding_slack": 1e-11,
        "residual_stride": 4,
        "study_tolerance": 0.0,
        "consistency_tolerance": 1e-12,
        "variance_slope_band": [-1.3, -0.7],
    }
    defaults.update(load_platform_config().get("analysis", {}))
    return defaults


def get_growth_check_config() -> dict:
    defaults = {"radii": [1.0, 10.0, 100.0, 1000.0], "samples": 10_000, "seed": 7}
    defaults.update(load_platform_config().get("growth_check", {}))
    return defaults


# ---------------------------------------------------------------------------
# Run configuration (scenario files)
# ---------------------------------------------------------------------------

@dataclass
class ProblemSpec:
    """Physical problem block: nonlinearity, coupling, data, domain, horizon."""

    nonlinearity: str
    components: int
    growth: dict | None = None
    allow_uncovered: bool = False
    coupling: list[list[float]] | None = None
    forcing: dict = field(default_factory=lambda: {"preset": "zero"})
    initial: dict = field(default_factory=lambda: {"expr": ["0"]})
    exact: dict | None = None
    domain: tuple[float, float] = (0.0, 1.0)
    T: float = 0.1


@dataclass
class DiscretizationSpec:
    K: int
    N: int
    dt: float
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 0.5
    fallback_fixed_point: bool = True
    max_fixed_point_iters: int = 500
    time_quad_points: int = 4


@dataclass
class EnsembleSpec:
    M: int = 1
    epsilon: float = 0.0
    seed: int = 0
    law: str = "uniform"
    record_times: list[int] | None = None


@dataclass
class StudySpec:
    axes: dict[str, list[float]] = field(default_factory=dict)
    mc_M: list[int] = field(default_factory=list)
    mc_replicas: int = 16
    mc_moment: str = "xi"


@dataclass
class CheckSpec:
    samples: int = 10_000
    radii: list[float] = field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0])
    seed: int = 7
    er_exponent: float | None = None
    witnesses: list[tuple[list[float], list[float]]] = field(default_factory=list)
    branch: str | None = None


@dataclass
class OutputSpec:
    directory: str = "runs"
    formats: list[str] = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    """Parsed and validated run configuration."""

    name: str
    problem: ProblemSpec
    discretization: DiscretizationSpec
    ensemble: EnsembleSpec
    study: StudySpec
    check: CheckSpec
    output: OutputSpec
    raw: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def load_run_config(path: str | Path, seed: int | None = None,
                    allow_uncovered: bool | None = None) -> RunConfig:
    """Load and validate a YAML run configuration.

    CLI overrides (seed, allow_uncovered) are applied before validation.
    Raises ConfigurationError on any malformed or inadmissible entry.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Config {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config {path} must be a key/value tree")

    data = copy.deepcopy(data)
    if seed is not None:
        data.setdefault("ensemble", {})["seed"] = int(seed)
    if allow_uncovered is not None:
        data.setdefault("problem", {})["allow_uncovered"] = bool(allow_uncovered)

    return parse_run_config(data, name=path.stem)


def parse_run_config(data: dict, name: str = "run") -> RunConfig:
    """Build a RunConfig from an already loaded key/value tree."""
    try:
        problem = _parse_problem(data.get("problem") or {})
        disc = _parse_discretization(data.get("discretization") or {}, problem.T)
        ens = _parse_ensemble(data.get("ensemble") or {}, disc.N)
        study = _parse_study(data.get("study") or {})
        check = _parse_check(data.get("check") or {})
        out_raw = data.get("output") or {}
        output = OutputSpec(
            directory=str(out_raw.get("directory", AppConfig.from_env().output_dir)),
            formats=list(out_raw.get("formats", ["csv", "json"])),
        )
    except ConfigurationError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigurationError(f"Malformed config '{name}': {e}") from e

    cfg = RunConfig(
        name=name, problem=problem, discretization=disc, ensemble=ens,
        study=study, check=check, output=output, raw=data,
    )
    cfg.warnings.extend(_validate_structure(cfg))
    return cfg


def _parse_problem(raw: dict) -> ProblemSpec:
    nl_raw = raw.get("nonlinearity")
    if isinstance(nl_raw, str):
        nl_name, growth = nl_raw, None
    elif isinstance(nl_raw, dict) and "name" in nl_raw:
        nl_name, growth = str(nl_raw["name"]), nl_raw.get("params")
    else:
        raise ConfigurationError("problem.nonlinearity must be a name or {name, params}")

    domain = tuple(float(v) for v in raw.get("domain", (0.0, 1.0)))
    if len(domain) != 2 or not domain[1] > domain[0]:
        raise ConfigurationError(f"problem.domain must be an interval (a, b) with a < b, got {domain}")

    T = float(raw.get("T", 0.1))
    if not T > 0:
        raise ConfigurationError(f"problem.T must be positive, got {T}")

    m = int(raw.get("components", 1))
    if m < 1:
        raise ConfigurationError("problem.components must be >= 1")

    coupling = raw.get("coupling")
    if coupling is not None:
        coupling = [[float(v) for v in row] for row in coupling]
        if len(coupling) != m or any(len(row) != m for row in coupling):
            raise ConfigurationError(f"problem.coupling must be a {m}x{m} matrix")

    return ProblemSpec(
        nonlinearity=nl_name,
        components=m,
        growth=growth,
        allow_uncovered=bool(raw.get("allow_uncovered", False)),
        coupling=coupling,
        forcing=dict(raw.get("forcing") or {"preset": "zero"}),
        initial=dict(raw.get("initial") or {"expr": ["0"] * m}),
        exact=dict(raw["exact"]) if raw.get("exact") else None,
        domain=domain,
        T=T,
    )


def _parse_discretization(raw: dict, T: float) -> DiscretizationSpec:
    defaults = get_solver_defaults()
    K = int(raw.get("K", 32))
    if "N" in raw:
        N = int(raw["N"])
        if N < 1:
            raise ConfigurationError("discretization.N must be >= 1")
        dt = T / N
    elif "dt" in raw:
        dt = float(raw["dt"])
        if not dt > 0:
            raise ConfigurationError("discretization.dt must be positive")
        N = int(round(T / dt))
        if N < 1 or abs(N * dt - T) > 1e-9 * T:
            raise ConfigurationError(f"discretization.dt={dt} does not divide T={T}")
        dt = T / N
    else:
        raise ConfigurationError("discretization needs N or dt")

    return DiscretizationSpec(
        K=K, N=N, dt=dt,
        newton_tol=float(raw.get("newton_tol", defaults["newton_tol"])),
        max_newton_iters=int(raw.get("max_newton_iters", defaults["max_newton_iters"])),
        damping=float(raw.get("damping", defaults["damping"])),
        fallback_fixed_point=bool(raw.get("fallback_fixed_point", defaults["fallback_fixed_point"])),
        max_fixed_point_iters=int(raw.get("max_fixed_point_iters", defaults["max_fixed_point_iters"])),
        time_quad_points=int(raw.get("time_quad_points", defaults["time_quad_points"])),
    )


def _parse_ensemble(raw: dict, N: int) -> EnsembleSpec:
    defaults = get_ensemble_defaults()
    record = raw.get("record_times")
    if record is not None:
        record = sorted({int(i) for i in record})
        if record[0] < 0 or record[-1] > N:
            raise ConfigurationError(f"ensemble.record_times must lie in [0, {N}]")
    return EnsembleSpec(
        M=int(raw.get("M", 1)),
        epsilon=float(raw.get("epsilon", 0.0)),
        seed=int(raw.get("seed", 0)),
        law=str(raw.get("law", defaults["law"])),
        record_times=record,
    )


def _parse_study(raw: dict) -> StudySpec:
    axes = {str(k): [float(v) for v in vals] for k, vals in (raw.get("axes") or {}).items()}
    mc = raw.get("mc") or {}
    return StudySpec(
        axes=axes,
        mc_M=[int(v) for v in mc.get("M", [])],
        mc_replicas=int(mc.get("replicas", 16)),
        mc_moment=str(mc.get("moment", "xi")),
    )


def _parse_check(raw: dict) -> CheckSpec:
    gc = get_growth_check_config()
    witnesses = [(list(map(float, w[0])), list(map(float, w[1]))) for w in raw.get("witnesses", [])]
    er = raw.get("er_exponent")
    return CheckSpec(
        samples=int(raw.get("samples", gc["samples"])),
        radii=[float(r) for r in raw.get("radii", gc["radii"])],
        seed=int(raw.get("seed", gc["seed"])),
        er_exponent=float(er) if er is not None else None,
        witnesses=witnesses,
        branch=raw.get("branch"),
    )


def _validate_structure(cfg: RunConfig) -> list[str]:
    """Enforce registry names, GrowthParams invariants and ensemble ranges.

    Structural violations are hard errors unless allow_uncovered is set,
    in which case they come back as warnings to stamp on the artifacts.
    """
    from nonlinearity.growth import GrowthParams
    from nonlinearity.registry import NONLINEARITIES, get_nonlinearity

    p = cfg.problem
    if p.nonlinearity not in NONLINEARITIES:
        raise ConfigurationError(
            f"Unknown nonlinearity '{p.nonlinearity}' (known: {', '.join(sorted(NONLINEARITIES))})"
        )

    issues: list[str] = []
    params = None
    if p.growth is not None:
        params = GrowthParams.from_dict(p.growth, m=p.components, n=1)
        issues.extend(params.violations())

    nl = get_nonlinearity(p.nonlinearity, params=params, m=p.components)
    if nl.m is not None and nl.m != p.components:
        raise ConfigurationError(
            f"Nonlinearity '{p.nonlinearity}' needs {nl.m} components, config has {p.components}"
        )
    if not nl.theory_covered:
        issues.append(f"nonlinearity '{p.nonlinearity}' has regimes outside the growth theory")

    if issues and not p.allow_uncovered:
        raise ConfigurationError("; ".join(issues) + " (set allow_uncovered to proceed)")

    e = cfg.ensemble
    if e.M < 1:
        raise ConfigurationError("ensemble.M must be >= 1")
    if not 0.0 <= e.epsilon <= 1.0:
        raise ConfigurationError("ensemble.epsilon must lie in [0, 1]")

    for w in issues:
        logger.warning(f"[{cfg.name}] {w}")
    return issues
