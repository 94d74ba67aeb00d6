"""Implicit Euler stepping over the P1 Galerkin space."""

from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.forcing import Forcing, average_forcing, forcing_load
from stepper.solver import StepStats, StepSystem, implicit_euler_step, solve_step, step_residual
from stepper.trajectory import Trajectory, interpolant_constant, interpolant_linear, run_trajectory
from stepper.advisory import contraction_factor, max_stable_dt_advisory
from stepper.export import export_trajectory

__all__ = [
    "CouplingMatrix", "SchemeConfig", "Forcing", "average_forcing", "forcing_load",
    "StepStats", "StepSystem", "implicit_euler_step", "solve_step", "step_residual",
    "Trajectory", "interpolant_constant", "interpolant_linear", "run_trajectory",
    "contraction_factor", "max_stable_dt_advisory", "export_trajectory",
]
