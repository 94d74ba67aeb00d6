"""
Reproducible experiment description: everything needed to rebuild the
mesh, the initial field and the solver configurations at any level of
h, dt, M or epsilon.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ensemble.runner import EnsembleConfig, EnsembleResult, MomentFn, run_ensemble
from errors import ConfigurationError
from fem.assembly import l2_project
from fem.fields import FeField
from fem.mesh import Mesh1D, build_uniform_mesh
from nonlinearity.registry import Nonlinearity
from stepper.forcing import Forcing
from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.trajectory import Trajectory, run_trajectory


@dataclass(frozen=True)
class ExperimentSetup:
    nonlinearity: Nonlinearity
    coupling: CouplingMatrix
    forcing: Forcing
    initial: Callable[[np.ndarray], np.ndarray]     # x -> (len(x), m)
    K: int
    N: int
    T: float
    domain: tuple[float, float] = (0.0, 1.0)
    solver: dict = field(default_factory=dict)      # extra SchemeConfig keywords
    M: int = 1
    epsilon: float = 0.0
    seed: int = 0
    law: str = "uniform"
    record_times: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.coupling.m != self.forcing.m:
            raise ConfigurationError(f"Coupling has {self.coupling.m} components, forcing {self.forcing.m}")

    @property
    def m(self) -> int:
        return self.coupling.m

    @property
    def dt(self) -> float:
        return self.T / self.N

    def mesh(self) -> Mesh1D:
        return build_uniform_mesh(self.K, self.domain)

    def initial_field(self, mesh: Optional[Mesh1D] = None) -> FeField:
        return l2_project(mesh or self.mesh(), self.initial)

    def scheme(self) -> SchemeConfig:
        return SchemeConfig(dt=self.dt, N=self.N, **self.solver)

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(M=self.M, epsilon=self.epsilon, seed=self.seed, law=self.law,
                              record_times=self.record_times)

    def with_level(self, axis: str, value: float) -> "ExperimentSetup":
        """Copy with one refinement axis set: dt, M, h or eps."""
        if axis == "dt":
            N = max(1, int(round(self.T / float(value))))
            return replace(self, N=N, record_times=None)
        if axis == "M":
            return replace(self, M=int(value))
        if axis == "h":
            span = self.domain[1] - self.domain[0]
            return replace(self, K=max(2, int(round(span / float(value)))))
        if axis == "eps":
            return replace(self, epsilon=float(value))
        raise ConfigurationError(f"Unknown refinement axis '{axis}' (known: dt, M, h, eps)")

    def run_trajectory(self) -> Trajectory:
        mesh = self.mesh()
        return run_trajectory(mesh, self.nonlinearity, self.coupling, self.initial_field(mesh),
                              self.forcing, self.scheme())

    def run_ensemble(self, moments: Optional[dict[str, MomentFn]] = None, n_jobs: int = 1,
                     seed: Optional[int] = None) -> EnsembleResult:
        mesh = self.mesh()
        cfg = self.ensemble_config()
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        return run_ensemble(mesh, self.nonlinearity, self.coupling, self.initial_field(mesh),
                            self.forcing, self.scheme(), cfg, moments=moments, n_jobs=n_jobs)

    def describe(self) -> dict:
        return {
            "nonlinearity": self.nonlinearity.name, "K": self.K, "N": self.N, "T": self.T,
            "dt": self.dt, "domain": list(self.domain), "M": self.M, "epsilon": self.epsilon,
            "seed": self.seed, "law": self.law, "forcing": self.forcing.label,
        }
