"""Ensemble approximation of Young measure solutions."""

from ensemble.perturbation import (
    PerturbationField,
    ScalarLaw,
    draw_perturbations,
    inverse_cdf_sample,
    perturb_initial,
)
from ensemble.measures import EmpiricalYoungMeasure, measure_moment, measure_spread, moment_field
from ensemble.runner import EnsembleConfig, EnsembleResult, gradient_consistency, mean_field, run_ensemble
from ensemble.export import export_measures, histogram_frame, load_ensemble

__all__ = [
    "PerturbationField", "ScalarLaw", "draw_perturbations", "inverse_cdf_sample",
    "perturb_initial", "EmpiricalYoungMeasure", "measure_moment", "measure_spread",
    "moment_field", "EnsembleConfig", "EnsembleResult", "gradient_consistency",
    "mean_field", "run_ensemble", "export_measures", "histogram_frame", "load_ensemble",
]
