"""
Ensemble construction of approximate Young measure solutions.

Every member starts from u0h + eps * v_k and is marched with the same
scheme. Members may run in parallel (joblib); their outputs are consumed
in member order, so all sums are formed in a fixed order and the result
is bit-identical for any thread count.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed

from config import get_ensemble_defaults
from errors import ConfigurationError, NonConvergenceError
from ensemble.measures import EmpiricalYoungMeasure, ordered_mean
from ensemble.perturbation import PERTURBATION_LAWS, draw_member_perturbation, perturb_initial
from fem.fields import FeField, element_slopes
from fem.mesh import Mesh1D
from nonlinearity.diagnostics import uncovered_fraction
from nonlinearity.registry import Nonlinearity
from stepper.forcing import Forcing, forcing_load
from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.solver import element_flux
from stepper.trajectory import run_trajectory

logger = logging.getLogger(__name__)

MomentFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EnsembleConfig:
    M: int = 1
    epsilon: float = 0.0
    seed: int = 0
    law: str = "uniform"
    record_times: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError(f"Ensemble size M must be >= 1, got {self.M}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"Perturbation amplitude must lie in [0, 1], got {self.epsilon}")
        if self.seed < 0:
            raise ConfigurationError(f"Seed must be nonnegative, got {self.seed}")
        if self.law not in PERTURBATION_LAWS:
            raise ConfigurationError(f"Unknown perturbation law '{self.law}'")
        if self.record_times is not None:
            object.__setattr__(self, "record_times", tuple(sorted({int(i) for i in self.record_times})))

    @classmethod
    def from_spec(cls, spec) -> "EnsembleConfig":
        """Build from a config.EnsembleSpec."""
        return cls(M=spec.M, epsilon=spec.epsilon, seed=spec.seed, law=spec.law,
                   record_times=tuple(spec.record_times) if spec.record_times else None)

    def resolve_record_steps(self, N: int) -> tuple[int, ...]:
        if self.record_times is not None:
            steps = self.record_times
        else:
            fractions = get_ensemble_defaults()["record_fractions"]
            steps = tuple(sorted({int(round(f * N)) for f in fractions}))
        if steps[0] < 0 or steps[-1] > N:
            raise ConfigurationError(f"Record steps {list(steps)} outside 0..{N}")
        return steps

    def to_dict(self) -> dict:
        return {"M": self.M, "epsilon": self.epsilon, "seed": self.seed, "law": self.law,
                "record_times": list(self.record_times) if self.record_times else None}


@dataclass
class MemberOutput:
    member: int
    coeffs: np.ndarray                    # (N+1, n_interior, m)
    flux: np.ndarray                      # (N+1, n_elements, m)
    moments: dict[str, np.ndarray]        # name -> (N+1, n_elements, ...)
    stats: dict
    uncovered: float


@dataclass
class EnsembleResult:
    mesh: Mesh1D
    scheme: SchemeConfig
    config: EnsembleConfig
    record_steps: tuple[int, ...]
    mean_coeffs: np.ndarray               # (N+1, n_interior, m)
    flux_moments: np.ndarray              # (N+1, n_elements, m)
    step_moments: dict[str, np.ndarray]
    measures: EmpiricalYoungMeasure
    member_stats: list[dict] = field(default_factory=list)
    uncovered_fraction: float = 0.0
    nonlinearity: Optional[Nonlinearity] = None
    coupling: Optional[CouplingMatrix] = None
    loads: Optional[np.ndarray] = None    # (N, n_interior, m), shared by all members
    warnings: list[str] = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.config.M

    @property
    def N(self) -> int:
        return self.scheme.N

    @property
    def m(self) -> int:
        return self.mean_coeffs.shape[2]

    def mean_at_step(self, i: int) -> FeField:
        return FeField(self.mesh, self.mean_coeffs[i])

    def mean_at(self, t: float) -> FeField:
        """Mean field at time t, linear in t between grid points."""
        r = float(np.clip(t / self.scheme.dt, 0.0, self.N))
        i = min(int(np.floor(r)), self.N - 1)
        theta = r - i
        return FeField(self.mesh, (1.0 - theta) * self.mean_coeffs[i] + theta * self.mean_coeffs[i + 1])


def _run_member(k: int, mesh: Mesh1D, nl: Nonlinearity, B: CouplingMatrix, u0h: FeField,
                F: Forcing, scheme: SchemeConfig, cfg: EnsembleConfig,
                moments: dict[str, MomentFn]) -> MemberOutput:
    v = draw_member_perturbation(mesh, u0h.m, cfg.seed, k, cfg.law)
    start = perturb_initial(u0h, v, cfg.epsilon)

    N = scheme.N
    flux = np.empty((N + 1, mesh.n_elements, u0h.m))
    extra: dict[str, list[np.ndarray]] = {name: [] for name in moments}
    uncovered = []

    def on_step(i: int, coeffs: np.ndarray) -> None:
        flux[i] = element_flux(mesh, nl, coeffs)
        grads = element_slopes(mesh, coeffs)[:, :, None]
        for name, g in moments.items():
            extra[name].append(np.asarray(g(grads), dtype=float))
        if not nl.theory_covered:
            uncovered.append(uncovered_fraction(nl, grads))

    try:
        traj = run_trajectory(mesh, nl, B, start, F, scheme, on_step=on_step)
    except NonConvergenceError as e:
        raise e.at(member=k) from e
    return MemberOutput(
        member=k, coeffs=traj.coeffs, flux=flux,
        moments={name: np.stack(vals) for name, vals in extra.items()},
        stats=traj.solver_summary(),
        uncovered=float(np.mean(uncovered)) if uncovered else 0.0,
    )


def run_ensemble(mesh: Mesh1D, nl: Nonlinearity, B: CouplingMatrix, u0h: FeField, F: Forcing,
                 scheme: SchemeConfig, cfg: EnsembleConfig,
                 moments: Optional[dict[str, MomentFn]] = None, n_jobs: int = 1) -> EnsembleResult:
    """Run M perturbed members and reduce them in member order.

    `moments` maps names to vectorized g(gradients (n_elements, m, 1)); their
    ensemble averages are accumulated at every step. A member failure aborts
    the whole ensemble.
    """
    moments = dict(moments or {})
    record = cfg.resolve_record_steps(scheme.N)
    N, n, E, m = scheme.N, mesh.n_interior, mesh.n_elements, u0h.m

    acc_coeffs = np.zeros((N + 1, n, m))
    acc_flux = np.zeros((N + 1, E, m))
    acc_moments: dict[str, np.ndarray] = {}
    grad_atoms = np.empty((len(record), cfg.M, E, m, 1))
    state_atoms = np.zeros((len(record), cfg.M, n + 2, m))
    member_stats = []
    uncovered = []

    logger.info(f"Ensemble {nl.name}: M={cfg.M} eps={cfg.epsilon} law={cfg.law} seed={cfg.seed} "
                f"N={N} K={E} jobs={n_jobs}")
    outputs = Parallel(n_jobs=n_jobs, return_as="generator")(
        delayed(_run_member)(k, mesh, nl, B, u0h, F, scheme, cfg, moments) for k in range(cfg.M)
    )
    for out in outputs:
        k = out.member
        acc_coeffs += out.coeffs
        acc_flux += out.flux
        for name, vals in out.moments.items():
            if name not in acc_moments:
                acc_moments[name] = np.zeros_like(vals)
            acc_moments[name] += vals
        for row, step in enumerate(record):
            grad_atoms[row, k] = element_slopes(mesh, out.coeffs[step])[:, :, None]
            state_atoms[row, k, 1:-1] = out.coeffs[step]
        member_stats.append({"member": k, **out.stats})
        uncovered.append(out.uncovered)
        logger.debug(f"member {k} done: {out.stats}")

    frac = float(np.mean(uncovered)) if uncovered else 0.0
    warnings = []
    if frac > 0.0:
        msg = f"{frac:.1%} of visited gradients lie outside the theory-covered regime of {nl.name}"
        logger.warning(msg)
        warnings.append(msg)

    loads = np.stack([forcing_load(F, mesh, i, scheme.dt, scheme.time_quad_points) for i in range(1, N + 1)])

    result = EnsembleResult(
        mesh=mesh, scheme=scheme, config=cfg, record_steps=record,
        mean_coeffs=acc_coeffs / cfg.M, flux_moments=acc_flux / cfg.M,
        step_moments={name: acc / cfg.M for name, acc in acc_moments.items()},
        measures=EmpiricalYoungMeasure(mesh=mesh, record_steps=record, gradients=grad_atoms, states=state_atoms),
        member_stats=member_stats, uncovered_fraction=frac, nonlinearity=nl, coupling=B,
        loads=loads, warnings=warnings,
    )
    logger.info(f"Ensemble done: spread at step {record[-1]} = {float(np.ptp(grad_atoms[-1], axis=0).max()):.3e}")
    return result


def mean_field(result: EnsembleResult) -> dict[int, FeField]:
    """U = <mu, xi> at every recorded step."""
    return {step: result.mean_at_step(step) for step in result.record_steps}


def gradient_consistency(result: EnsembleResult) -> float:
    """max over recorded sites of |D(mean field) - mean of gradient atoms|."""
    worst = 0.0
    for row, step in enumerate(result.record_steps):
        dU = element_slopes(result.mesh, result.mean_coeffs[step])[:, :, None]
        avg = ordered_mean(result.measures.gradients[row])
        worst = max(worst, float(np.max(np.abs(dU - avg))))
    return worst
