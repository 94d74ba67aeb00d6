"""Tests for perturbations, inverse-transform sampling and empirical Young measures."""

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cli.builder import build_setup
from config import load_run_config
from ensemble.export import export_measures, histogram_frame, load_ensemble
from ensemble.measures import EmpiricalYoungMeasure, measure_moment, measure_spread, moment_field
from ensemble.perturbation import (
    ScalarLaw,
    draw_member_perturbation,
    draw_perturbations,
    inverse_cdf_sample,
    perturb_initial,
)
from ensemble.runner import EnsembleConfig, gradient_consistency, mean_field, run_ensemble
from errors import ConfigurationError, DomainError, SolverError, UnknownSiteError
from fem.assembly import l2_norm, l2_project
from fem.fields import FeField, element_slopes
from fem.mesh import build_uniform_mesh
from nonlinearity.registry import Nonlinearity, a_eval
from stepper.forcing import Forcing
from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.trajectory import run_trajectory
from tests.conftest import sine_initial

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def test_point_mass_sampler():
    """Every level maps to the atom."""
    law = ScalarLaw.point_mass(2.5)
    np.testing.assert_array_equal(inverse_cdf_sample(law, np.linspace(0.0, 0.99, 7)), 2.5)


def test_uniform_sampler_is_identity():
    """Uniform on [0, 1]: the inverse CDF is the identity."""
    w = np.array([0.0, 0.1, 0.5, 0.999])
    np.testing.assert_allclose(inverse_cdf_sample(ScalarLaw.uniform(), w), w)


def test_two_atom_sampler():
    """{0 w.p. 0.3, 1 w.p. 0.7}: pointwise values and frequencies."""
    law = ScalarLaw.discrete([0.0, 1.0], [0.3, 0.7])
    assert inverse_cdf_sample(law, 0.2) == 0.0
    assert inverse_cdf_sample(law, 0.5) == 1.0
    draws = inverse_cdf_sample(law, np.random.default_rng(0).random(100_000))
    assert abs(np.mean(draws == 0.0) - 0.3) <= 0.01
    assert abs(np.mean(draws == 1.0) - 0.7) <= 0.01


def test_bisection_sampler():
    """A CDF without a closed-form quantile is inverted numerically."""
    law = ScalarLaw.from_cdf(lambda v: 1.0 - np.exp(-v), 0.0, 50.0)
    assert inverse_cdf_sample(law, 0.5) == pytest.approx(np.log(2.0), rel=1e-9)


def test_sampler_rejects_levels_outside_unit_interval():
    with pytest.raises(DomainError):
        inverse_cdf_sample(ScalarLaw.uniform(), 1.0)
    with pytest.raises(DomainError):
        inverse_cdf_sample(ScalarLaw.uniform(), -0.1)
    with pytest.raises(ConfigurationError):
        ScalarLaw.discrete([0.0, 1.0], [0.5, 0.6])


@pytest.mark.parametrize("law", ["uniform", "gaussian", "two_point"])
def test_perturbations_in_unit_ball(law):
    """Every drawn field has L2 norm at most 1, and seeds reproduce it."""
    mesh = build_uniform_mesh(16)
    fields = draw_perturbations(mesh, 8, seed=4, law=law, m=2)
    assert all(f.norm <= 1.0 + 1e-12 for f in fields)
    again = draw_member_perturbation(mesh, 2, seed=4, k=5, law=law)
    assert np.array_equal(again.field.coeffs, fields[5].field.coeffs)


def test_perturbation_mean_is_small():
    """M = 256 uniform draws: the nodal mean is within the CLT scale."""
    mesh = build_uniform_mesh(16)
    fields = draw_perturbations(mesh, 256, seed=11)
    values = np.stack([f.field.coeffs for f in fields])
    assert abs(values.mean()) <= 3.0 / np.sqrt(256 * mesh.n_interior)


def test_unknown_law_rejected():
    with pytest.raises(ConfigurationError):
        draw_member_perturbation(build_uniform_mesh(4), 1, seed=0, k=0, law="cauchy")


def test_perturb_initial():
    """eps = 0 and zero fields leave u0 unchanged; the shift has norm eps ||v||."""
    mesh = build_uniform_mesh(16)
    u0 = l2_project(mesh, sine_initial)
    v = draw_member_perturbation(mesh, 1, seed=2, k=0)
    assert np.array_equal(perturb_initial(u0, v, 0.0).coeffs, u0.coeffs)
    assert np.array_equal(perturb_initial(u0, FeField.zeros(mesh, 1), 0.3).coeffs, u0.coeffs)
    shifted = perturb_initial(u0, v, 0.25)
    assert l2_norm(shifted - u0) == pytest.approx(0.25 * v.norm, rel=1e-12)


def test_ensemble_config_validation():
    with pytest.raises(ConfigurationError):
        EnsembleConfig(M=0)
    with pytest.raises(ConfigurationError):
        EnsembleConfig(M=2, epsilon=1.5)
    with pytest.raises(ConfigurationError):
        EnsembleConfig(M=2, law="cauchy")
    assert EnsembleConfig().resolve_record_steps(8) == (0, 2, 4, 6, 8)


def test_single_member_is_the_trajectory(heat_setup):
    """M = 1: Dirac measures and a mean equal to the single trajectory."""
    setup = replace(heat_setup, M=1, epsilon=0.0)
    result = setup.run_ensemble()
    traj = setup.run_trajectory()
    assert np.array_equal(result.mean_coeffs, traj.coeffs)
    assert gradient_consistency(result) == 0.0
    step = result.record_steps[-1]
    atoms = result.measures.atoms((step, 3))
    assert atoms.shape == (1, 1, 1)
    assert atoms[0, 0, 0] == element_slopes(traj.mesh, traj.coeffs[step])[3, 0]


def test_zero_amplitude_collapses_members(heat_setup):
    """eps = 0: all members coincide, every measure is a Dirac mass."""
    result = replace(heat_setup, M=4, epsilon=0.0).run_ensemble()
    assert all(v == 0.0 for v in measure_spread(result.measures).values())


def test_measure_invariants(becu_setup):
    """Unit mass, M atoms per site, g = 1 gives 1, g = a matches direct averaging."""
    setup = replace(becu_setup, M=6, epsilon=0.02)
    result = setup.run_ensemble()
    meas = result.measures
    assert meas.total_mass() == 1.0
    for site in meas.sites[:5]:
        assert meas.atoms(site).shape == (6, 3, 1)
        assert measure_moment(meas, lambda A: np.ones(A.shape[0]), site) == 1.0
    site = (result.record_steps[-1], 7)
    nl = setup.nonlinearity
    direct = np.mean([a_eval(nl, g) for g in meas.atoms(site)], axis=0)
    np.testing.assert_allclose(measure_moment(meas, lambda A: a_eval(nl, A), site), direct, rtol=1e-13, atol=1e-15)
    field = moment_field(meas, lambda A: a_eval(nl, A), site[0])
    np.testing.assert_allclose(field[7], direct, rtol=1e-13, atol=1e-15)


def test_gradient_consistency(becu_setup):
    """D(mean field) equals the mean of the gradient atoms up to rounding."""
    result = replace(becu_setup, M=8, epsilon=0.05).run_ensemble()
    scale = max(1.0, float(np.abs(result.measures.gradients).max()))
    assert gradient_consistency(result) <= 1e-12 * scale
    means = mean_field(result)
    assert sorted(means) == list(result.record_steps)


def test_moments_are_exchangeable(becu_setup):
    """Permuting members leaves moments unchanged."""
    result = replace(becu_setup, M=5, epsilon=0.02).run_ensemble()
    meas = result.measures
    perm = np.array([3, 0, 4, 1, 2])
    shuffled = EmpiricalYoungMeasure(mesh=meas.mesh, record_steps=meas.record_steps,
                                     gradients=meas.gradients[:, perm], states=meas.states[:, perm])
    for site in meas.sites[::7]:
        np.testing.assert_allclose(measure_moment(shuffled, lambda A: A, site),
                                   measure_moment(meas, lambda A: A, site), rtol=0, atol=1e-13)


def test_unknown_site(heat_setup):
    result = replace(heat_setup, M=2, epsilon=0.1, record_times=(0, 10)).run_ensemble()
    assert result.record_steps == (0, 10)
    with pytest.raises(UnknownSiteError):
        result.measures.atoms((5, 0))
    with pytest.raises(UnknownSiteError):
        result.measures.atoms((10, 99))


def test_ensemble_is_deterministic_across_workers(heat_setup):
    """Same seed: identical atoms sequentially and with two workers."""
    setup = replace(heat_setup, M=4, epsilon=0.1)
    a = setup.run_ensemble()
    b = setup.run_ensemble(n_jobs=2)
    assert np.array_equal(a.measures.gradients, b.measures.gradients)
    assert np.array_equal(a.mean_coeffs, b.mean_coeffs)


def test_member_failure_aborts_ensemble():
    """A member that cannot be evaluated stops the whole ensemble."""
    broken = Nonlinearity(name="broken", kernel=lambda A: np.full(A.shape[:-2], np.nan), m=1)
    mesh = build_uniform_mesh(8)
    with pytest.raises(SolverError):
        run_ensemble(mesh, broken, CouplingMatrix.zero(1), l2_project(mesh, sine_initial), Forcing.zero(1),
                     SchemeConfig(dt=1e-3, N=2), EnsembleConfig(M=3, epsilon=0.1))


def test_export_and_reload(tmp_path, heat_setup):
    """Exported measures reload with identical atoms; histograms count every atom."""
    result = replace(heat_setup, M=3, epsilon=0.1).run_ensemble()
    paths = export_measures(result, tmp_path / "ens")
    for key in ("measures", "moments", "mean_field", "manifest", "joblib"):
        assert paths[key].exists()
    loaded = load_ensemble(paths["joblib"])
    assert np.array_equal(loaded.measures.gradients, result.measures.gradients)
    hist = histogram_frame(loaded, bins=4)
    per_site = hist.groupby(["step", "element", "component"])["count"].sum()
    assert (per_site == 3).all()


def test_gradient_consistency_of_bundled_becu_ensemble():
    """64 members, h = 1/32, dt = 1e-3, T = 0.05: D(mean) matches <nu, xi> at every site."""
    setup = build_setup(load_run_config(SCENARIOS / "becu_ensemble.yaml"))
    assert (setup.M, setup.K, setup.N) == (64, 32, 50)
    assert setup.dt == pytest.approx(1e-3)
    result = setup.run_ensemble()
    scale = float(np.abs(result.measures.gradients).max())
    assert gradient_consistency(result) <= 1e-12 * scale
    assert result.measures.total_mass() == 1.0


def test_completion_log_names_last_recorded_step(heat_setup, caplog):
    """With N outside the record times, the spread is reported for the last recorded step."""
    setup = replace(heat_setup, M=2, epsilon=0.1, record_times=(0, 5))
    with caplog.at_level(logging.INFO, logger="ensemble.runner"):
        setup.run_ensemble()
    done = [r.getMessage() for r in caplog.records if "Ensemble done" in r.getMessage()]
    assert len(done) == 1
    assert "spread at step 5" in done[0]
