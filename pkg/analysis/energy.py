"""
Discrete energy accounting for implicit Euler trajectories.

Testing step i with 2 dt u_i gives, for every prefix 1..k,

    ||u_k||^2 + sum ||u_i - u_{i-1}||^2 + 2 dt sum (a(Du_i), Du_i)
        <= ||u_0||^2 + 2 sum (int F dt, u_i)

once the coupling term (B u_i, u_i) >= 0 is dropped.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from config import get_analysis_config
from fem.assembly import gauss_rule, mass_inner
from fem.fields import element_slopes
from nonlinearity.growth import GrowthParams
from nonlinearity.registry import Nonlinearity, a_eval
from stepper.forcing import Forcing, forcing_load
from stepper.solver import element_flux
from stepper.trajectory import Trajectory, interpolant_constant, interpolant_linear

logger = logging.getLogger(__name__)

SLACK_FORMULA = ("eps_solver = 2 (N+1) dt tol sqrt(3 n_dofs / h_min) max_i ||u_i|| "
                 "+ rounding * (1 + ||u_0||^2 + sum |terms|)")


@dataclass
class EnergyLedger:
    """Per-step terms; index i = 1..N stored at position i - 1 (kinetic holds 0..N)."""
    kinetic: np.ndarray
    increment: np.ndarray
    dissipation: np.ndarray
    work: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    slack: float
    slack_formula: str = SLACK_FORMULA
    notes: list[str] = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.increment)

    @property
    def max_excess(self) -> float:
        """max_k (LHS_k - RHS_k); the inequality holds when this is <= slack."""
        return float(np.max(self.lhs - self.rhs)) if self.N else 0.0

    @property
    def passed(self) -> bool:
        return self.max_excess <= self.slack

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "step": np.arange(1, self.N + 1),
            "kinetic": self.kinetic[1:],
            "increment": self.increment,
            "dissipation": self.dissipation,
            "work": self.work,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "excess": self.lhs - self.rhs,
        })

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict, "max_excess": self.max_excess, "slack": self.slack,
            "slack_formula": self.slack_formula, "steps": self.N,
            "min_dissipation": float(self.dissipation.min()) if self.N else 0.0,
            "notes": self.notes,
        }


def energy_ledger(traj: Trajectory, nl: Optional[Nonlinearity] = None, F: Optional[Forcing] = None) -> EnergyLedger:
    """Build the ledger of a completed trajectory.

    The loads stored on the trajectory are used unless a forcing is given,
    in which case the slab averages are recomputed from it.
    """
    nl = nl or traj.nonlinearity
    mesh, dt, N = traj.mesh, traj.dt, traj.N
    if F is not None:
        loads = np.stack([forcing_load(F, mesh, i, dt, traj.scheme.time_quad_points) for i in range(1, N + 1)])
    else:
        loads = traj.loads

    c = traj.coeffs
    kinetic = np.array([mass_inner(mesh, c[i], c[i]) for i in range(N + 1)])
    increment = np.array([mass_inner(mesh, c[i] - c[i - 1], c[i] - c[i - 1]) for i in range(1, N + 1)])
    dissipation = np.empty(N)
    for i in range(1, N + 1):
        g = element_slopes(mesh, c[i])
        dissipation[i - 1] = 2.0 * dt * float(np.sum(mesh.lengths[:, None] * element_flux(mesh, nl, c[i]) * g))
    work = 2.0 * dt * np.einsum("inm,inm->i", loads, c[1:])

    lhs = kinetic[1:] + np.cumsum(increment) + np.cumsum(dissipation)
    rhs = kinetic[0] + np.cumsum(work)

    rounding = float(get_analysis_config()["rounding_slack"])
    n_dofs = c.shape[1] * c.shape[2]
    max_norm = float(np.sqrt(kinetic.max())) if len(kinetic) else 0.0
    solver_part = 2.0 * (N + 1) * dt * traj.scheme.newton_tol * np.sqrt(3.0 * n_dofs / mesh.h_min) * max_norm
    scale = 1.0 + kinetic[0] + np.sum(np.abs(increment)) + np.sum(np.abs(dissipation)) + np.sum(np.abs(work))
    slack = float(solver_part + rounding * scale)

    notes = []
    if traj.coupling is not None and not traj.coupling.is_zero:
        if traj.coupling.check_positive():
            notes.append("coupling term dropped (B v . v >= 0 on samples)")
        else:
            notes.append("coupling matrix fails B v . v >= 0; inequality not implied")
    if N and dissipation.min() < -slack:
        notes.append("negative dissipation observed: a(xi):xi >= 0 fails on visited gradients")

    ledger = EnergyLedger(kinetic=kinetic, increment=increment, dissipation=dissipation, work=work,
                          lhs=lhs, rhs=rhs, slack=slack, notes=notes)
    log = logger.info if ledger.passed else logger.warning
    log(f"Energy ledger {ledger.verdict}: max excess {ledger.max_excess:.3e}, slack {slack:.3e}")
    return ledger


def interpolant_gap(traj: Trajectory, points: int = 3) -> tuple[float, float]:
    """(||u_dt - u~_dt||^2 over Q_T by Gauss quadrature in time, (dt/3) sum ||u_i - u_{i-1}||^2)."""
    s, w = gauss_rule(points)
    dt = traj.dt
    quad = 0.0
    for i in range(1, traj.N + 1):
        for sk, wk in zip(s, w):
            t = (i - 1 + sk) * dt
            diff = interpolant_linear(traj, t).coeffs - interpolant_constant(traj, t).coeffs
            quad += wk * dt * mass_inner(traj.mesh, diff, diff)
    c = traj.coeffs
    identity = dt / 3.0 * sum(mass_inner(traj.mesh, c[i] - c[i - 1], c[i] - c[i - 1])
                              for i in range(1, traj.N + 1))
    return float(quad), float(identity)


def discrete_bounds(traj: Trajectory, nl: Optional[Nonlinearity] = None,
                    params: Optional[GrowthParams] = None) -> dict:
    """A-priori quantities that stay bounded uniformly in h and dt."""
    nl = nl or traj.nonlinearity
    params = params or (nl.params if nl is not None else None)
    m = traj.m
    p = np.asarray(params.p if params is not None else (2.0,) * m)
    q_hat = params.q_hat if params is not None else 2.0
    q_conj = q_hat / (q_hat - 1.0)

    mesh, dt, c = traj.mesh, traj.dt, traj.coeffs
    L = mesh.lengths
    max_l2 = max(mass_inner(mesh, ci, ci) for ci in c)
    shift = sum(mass_inner(mesh, c[i] - c[i - 1], c[i] - c[i - 1]) for i in range(1, traj.N + 1))
    flux_norm = 0.0
    grad_norms = np.zeros(m)
    for i in range(1, traj.N + 1):
        g = element_slopes(mesh, c[i])
        a = a_eval(nl, g[:, :, None])[:, :, 0]
        flux_norm += dt * float(np.sum(L * np.sqrt(np.sum(a ** 2, axis=1)) ** q_conj))
        grad_norms += dt * np.sum(L[:, None] * np.abs(g) ** p[None, :], axis=0)
    return {
        "max_l2_squared": float(max_l2),
        "time_shift": float(shift),
        "flux_lq_conj": float(flux_norm),
        "q_hat_conjugate": float(q_conj),
        "gradient_lp": float(grad_norms.sum()),
        "gradient_lp_components": grad_norms.tolist(),
    }
