"""Verification instruments: energy accounting, weak residuals, dependence and studies."""

from analysis.setup import ExperimentSetup
from analysis.energy import EnergyLedger, discrete_bounds, energy_ledger, interpolant_gap
from analysis.residual import TestFamily, WeakResidualReport, weak_residual
from analysis.dependence import DependenceReport, continuous_dependence
from analysis.studies import StudyReport, mc_variance_study, refinement_study

__all__ = [
    "ExperimentSetup", "EnergyLedger", "discrete_bounds", "energy_ledger", "interpolant_gap",
    "TestFamily", "WeakResidualReport", "weak_residual", "DependenceReport",
    "continuous_dependence", "StudyReport", "mc_variance_study", "refinement_study",
]
