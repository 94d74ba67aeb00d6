"""
Time marching over the full grid and the two time interpolants of a
computed trajectory (continuous piecewise linear and piecewise constant).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from errors import ConfigurationError, DomainError, NonConvergenceError
from fem.fields import FeField
from fem.mesh import Mesh1D
from nonlinearity.registry import Nonlinearity
from stepper.forcing import Forcing, forcing_load
from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.solver import StepStats, StepSystem, implicit_euler_step

logger = logging.getLogger(__name__)

_SNAP = 1e-9


@dataclass
class Trajectory:
    """Snapshots u_0 .. u_N with the data needed to re-check them."""
    mesh: Mesh1D
    scheme: SchemeConfig
    coeffs: np.ndarray          # (N+1, n_interior, m)
    loads: np.ndarray           # (N, n_interior, m), load of F_i for step i = 1..N
    stats: list[StepStats] = field(default_factory=list)
    nonlinearity: Optional[Nonlinearity] = None
    coupling: Optional[CouplingMatrix] = None

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def m(self) -> int:
        return self.coeffs.shape[2]

    @property
    def dt(self) -> float:
        return self.scheme.dt

    @property
    def T(self) -> float:
        return self.scheme.T

    @property
    def times(self) -> np.ndarray:
        return self.scheme.times

    def snapshot(self, i: int) -> FeField:
        return FeField(self.mesh, self.coeffs[i])

    @property
    def snapshots(self) -> list[FeField]:
        return [self.snapshot(i) for i in range(self.N + 1)]

    @property
    def final(self) -> FeField:
        return self.snapshot(self.N)

    def solver_summary(self) -> dict:
        if not self.stats:
            return {"steps": 0}
        return {
            "steps": len(self.stats),
            "total_iterations": int(sum(s.iterations for s in self.stats)),
            "max_iterations": int(max(s.iterations for s in self.stats)),
            "max_residual": float(max(s.residual for s in self.stats)),
            "fixed_point_steps": int(sum(s.method == "fixed_point" for s in self.stats)),
        }


def run_trajectory(mesh: Mesh1D, nl: Nonlinearity, B: CouplingMatrix, u0h: FeField,
                   F: Forcing, cfg: SchemeConfig,
                   on_step: Optional[Callable[[int, np.ndarray], None]] = None) -> Trajectory:
    """March u0h through N implicit Euler steps.

    `on_step(i, coeffs)` is called for i = 0..N with the accepted coefficients.
    NonConvergenceError carries the index of the failing step.
    """
    if u0h.m != B.m or F.m != B.m:
        raise ConfigurationError(f"Component counts disagree: u0 {u0h.m}, B {B.m}, F {F.m}")
    system = StepSystem(mesh, nl, B, cfg.dt)
    coeffs = np.empty((cfg.N + 1, mesh.n_interior, u0h.m))
    loads = np.empty((cfg.N, mesh.n_interior, u0h.m))
    coeffs[0] = u0h.coeffs
    if on_step is not None:
        on_step(0, coeffs[0])
    stats: list[StepStats] = []
    u = u0h
    for i in range(1, cfg.N + 1):
        loads[i - 1] = forcing_load(F, mesh, i, cfg.dt, cfg.time_quad_points)
        try:
            u, st = implicit_euler_step(mesh, nl, B, u, loads[i - 1], cfg, system=system)
        except NonConvergenceError as e:
            raise e.at(step=i) from e
        coeffs[i] = u.coeffs
        stats.append(st)
        if on_step is not None:
            on_step(i, coeffs[i])
        logger.debug(f"step {i}/{cfg.N} t={i * cfg.dt:.4g} it={st.iterations} res={st.residual:.2e}")

    traj = Trajectory(mesh=mesh, scheme=cfg, coeffs=coeffs, loads=loads, stats=stats,
                      nonlinearity=nl, coupling=B)
    summary = traj.solver_summary()
    logger.info(f"Trajectory {nl.name}: N={cfg.N} dt={cfg.dt:.3g} K={mesh.n_elements} "
                f"iterations={summary['total_iterations']} max_res={summary['max_residual']:.2e}")
    return traj


def _locate(traj: Trajectory, t: float, lower: float) -> tuple[int, float]:
    """Slab index i with t in [t_{i-1}, t_i] and the ratio r = t / dt, snapped to grid points."""
    if not np.isfinite(t) or t < lower - _SNAP * traj.dt or t > traj.T + _SNAP * traj.dt:
        raise DomainError(f"t={t} outside [{lower}, {traj.T}]")
    r = t / traj.dt
    if abs(r - round(r)) <= _SNAP:
        r = float(round(r))
    return int(np.clip(np.ceil(r), 0, traj.N)), r


def interpolant_linear(traj: Trajectory, t: float) -> FeField:
    """u_dt(t) = ((t - t_{i-1})/dt) u_i + ((t_i - t)/dt) u_{i-1} on [t_{i-1}, t_i]."""
    i, r = _locate(traj, t, 0.0)
    if r == i:
        return traj.snapshot(i)
    theta = r - (i - 1)
    return FeField(traj.mesh, theta * traj.coeffs[i] + (1.0 - theta) * traj.coeffs[i - 1])


def interpolant_constant(traj: Trajectory, t: float) -> FeField:
    """u~_dt(t) = u_i on (t_{i-1}, t_i], and u_0 on [-dt, 0]."""
    i, _ = _locate(traj, t, -traj.dt)
    return traj.snapshot(max(i, 0))
