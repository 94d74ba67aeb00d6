"""Tests for the verification layer: energy ledger, weak residual, dependence and studies."""

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from analysis.dependence import continuous_dependence
from analysis.energy import discrete_bounds, energy_ledger, interpolant_gap
from analysis.reports import add_verdict, new_summary, render_summary, write_report
from analysis.residual import TestFamily, weak_residual
from analysis.studies import integrated_moment, mc_variance_study, refinement_study, replica_seeds
from cli.builder import build_setup
from config import load_run_config
from errors import ConfigurationError, DegenerateInputError
from fem.assembly import assemble_stiffness_matrix, l2_project
from fem.fields import FeField
from fem.mesh import build_uniform_mesh
from stepper.forcing import Forcing
from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.trajectory import run_trajectory
from tests.conftest import becu_initial, sine_initial

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def test_zero_trajectory_ledger(becu):
    """u0 = 0, F = 0: every ledger entry vanishes and the verdict is PASS."""
    mesh = build_uniform_mesh(8)
    traj = run_trajectory(mesh, becu, CouplingMatrix.becu_skew(), FeField.zeros(mesh, 3), Forcing.zero(3),
                          SchemeConfig(dt=1e-3, N=4))
    ledger = energy_ledger(traj)
    for arr in (ledger.kinetic, ledger.increment, ledger.dissipation, ledger.work):
        assert not np.any(arr)
    assert ledger.passed
    assert ledger.verdict == "PASS"
    report = weak_residual(traj)
    assert report.max_abs == 0.0


def test_heat_ledger(heat_setup):
    """Linear heat: dissipation is 2 dt |Du|^2 and the inequality holds."""
    traj = heat_setup.run_trajectory()
    ledger = energy_ledger(traj)
    assert ledger.passed
    assert np.all(ledger.dissipation >= 0)
    S = assemble_stiffness_matrix(traj.mesh)
    expected = [2 * traj.dt * float(np.sum(c * S.matvec(c))) for c in traj.coeffs[1:]]
    np.testing.assert_allclose(ledger.dissipation, expected, rtol=1e-12)
    assert "eps_solver" in ledger.slack_formula
    frame = ledger.to_frame()
    assert len(frame) == traj.N


def test_becu_ledger_with_skew_coupling(becu_setup):
    """Skew B: the coupling term drops out and the inequality still holds."""
    traj = becu_setup.run_trajectory()
    ledger = energy_ledger(traj)
    assert ledger.passed
    assert any("coupling term dropped" in n for n in ledger.notes)


def test_ledger_with_forcing_recomputed(becu_setup):
    """Recomputing slab averages from the forcing gives the stored work terms."""
    traj = becu_setup.run_trajectory()
    stored = energy_ledger(traj)
    again = energy_ledger(traj, F=becu_setup.forcing)
    np.testing.assert_allclose(again.work, stored.work, rtol=1e-14, atol=1e-16)


def test_interpolant_gap_identity(becu_setup, heat_setup):
    """||u_dt - u~_dt||^2 = (dt/3) sum ||u_i - u_{i-1}||^2 to 1e-12 relative."""
    for setup in (heat_setup, becu_setup):
        quad, identity = interpolant_gap(setup.run_trajectory())
        assert identity > 0
        assert quad == pytest.approx(identity, rel=1e-12)


def test_trajectory_weak_residual(becu_setup):
    """A solved trajectory meets its own test family within the solver tolerance."""
    traj = becu_setup.run_trajectory()
    report = weak_residual(traj)
    assert report.passed
    assert report.max_ratio <= 1.0
    full = weak_residual(traj, family=TestFamily.strided(traj.mesh.n_interior, traj.N, traj.m, stride=1))
    assert full.passed
    assert len(full.tests) > len(report.tests)


def test_single_member_ensemble_residual(heat_setup):
    """M = 1: the ensemble residual equals the trajectory residual exactly."""
    setup = replace(heat_setup, M=1, epsilon=0.0)
    traj_report = weak_residual(setup.run_trajectory())
    ens_report = weak_residual(setup.run_ensemble())
    assert np.array_equal(traj_report.values, ens_report.values)


def test_weak_residual_rejects_other_subjects():
    with pytest.raises(ConfigurationError):
        weak_residual("not a trajectory")


def test_test_family_knots():
    """Coarse knots always end at N."""
    family = TestFamily.strided(15, 10, 2, stride=4)
    assert family.knots == (0, 4, 8, 10)
    assert family.nodes == (0, 4, 8, 12)
    hats = family.time_weights(10)
    assert hats.shape == (3, 10)
    assert np.all(hats >= 0)


def test_discrete_bounds(heat_setup):
    bounds = discrete_bounds(heat_setup.run_trajectory())
    assert bounds["q_hat_conjugate"] == pytest.approx(2.0)
    assert all(np.isfinite(v) for k, v in bounds.items() if not isinstance(v, list))


def test_heat_dependence_contracts(heat):
    """Linear heat: the dependence ratio is at most 1."""
    mesh = build_uniform_mesh(16)
    cfg = SchemeConfig(dt=2e-3, N=10)
    u0 = l2_project(mesh, sine_initial)
    v0 = l2_project(mesh, lambda xs: (0.5 * np.sin(2 * np.pi * xs))[:, None]) + u0
    report = continuous_dependence(mesh, heat, CouplingMatrix.zero(1), Forcing.zero(1), cfg, u0, v0,
                                   lipschitz_samples=500)
    assert report.ratio <= 1.0 + 1e-12
    assert report.lipschitz == pytest.approx(1.0, rel=1e-9)
    assert np.isfinite(report.advisory_dt)


def test_dependence_rejects_identical_data(heat):
    mesh = build_uniform_mesh(8)
    u0 = l2_project(mesh, sine_initial)
    with pytest.raises(DegenerateInputError):
        continuous_dependence(mesh, heat, CouplingMatrix.zero(1), Forcing.zero(1), SchemeConfig(dt=1e-3, N=2), u0, u0)


def test_becu_dependence_stable_under_dt_halving(becu):
    """A tiny perturbation under the boundary-layer model: ratio stable within 20% as dt halves."""
    mesh = build_uniform_mesh(16)
    B = CouplingMatrix.becu_skew()
    F = Forcing.constant([-1.0, 1.0, 0.0])
    u0 = l2_project(mesh, becu_initial)
    bump = l2_project(mesh, lambda xs: np.stack([np.sin(np.pi * xs)] * 3, axis=1))
    v0 = u0 + bump.scaled(1e-6)
    ratios = [continuous_dependence(mesh, becu, B, F, SchemeConfig.from_horizon(0.01, N), u0, v0,
                                    lipschitz_samples=200).ratio for N in (10, 20)]
    assert all(np.isfinite(r) for r in ratios)
    assert ratios[1] == pytest.approx(ratios[0], rel=0.2)


def test_replica_seeds_are_reproducible():
    assert replica_seeds(5, 4) == replica_seeds(5, 4)
    assert len(set(replica_seeds(5, 16))) == 16


def test_mc_variance_deterministic_setup(heat_setup):
    """eps = 0: the variance is exactly zero at every M."""
    setup = replace(heat_setup, K=8, N=4, epsilon=0.0)
    report = mc_variance_study(setup, [1, 2], replicas=8)
    assert report.observables["variance"] == [0.0, 0.0]
    assert report.passed


def test_mc_variance_of_constant_moment(heat_setup):
    """g = 1: normalization is exact, so the variance vanishes."""
    setup = replace(heat_setup, K=8, N=4, epsilon=0.1)
    report = mc_variance_study(setup, [2, 4], replicas=8, moment="one")
    assert report.observables["variance"] == [0.0, 0.0]


def test_mc_variance_slope():
    """Bundled heat ensemble, eps = 0.1, 16 replicas, g = xi: the variance decays like 1/M."""
    cfg = load_run_config(SCENARIOS / "heat_ensemble.yaml")
    assert cfg.ensemble.epsilon == 0.1
    assert cfg.study.mc_M == [16, 64, 256] and cfg.study.mc_replicas == 16
    report = mc_variance_study(build_setup(cfg), cfg.study.mc_M, replicas=cfg.study.mc_replicas,
                               moment=cfg.study.mc_moment)
    assert all(v > 0 for v in report.observables["variance"])
    assert -1.3 <= report.rates[0] <= -0.7
    assert report.passed


def test_mc_variance_preconditions(heat_setup):
    with pytest.raises(ConfigurationError):
        mc_variance_study(heat_setup, [16], replicas=8)
    with pytest.raises(ConfigurationError):
        mc_variance_study(heat_setup, [64, 16], replicas=8)
    with pytest.raises(ConfigurationError):
        mc_variance_study(heat_setup, [16, 64], replicas=4)


def test_integrated_moment_of_one(heat_setup):
    """g = 1 integrates the weight (x - x0)/|Omega| over space and time: T/2."""
    from analysis.studies import resolve_moment
    result = replace(heat_setup, M=2, epsilon=0.1).run_ensemble(
        moments={"one": resolve_moment("one", heat_setup.nonlinearity)})
    assert integrated_moment(result, "one") == pytest.approx(heat_setup.T / 2, rel=1e-12)


def test_refinement_dt_axis(heat):
    """Linear heat: Cauchy differences roughly halve per dt halving."""
    from analysis.setup import ExperimentSetup
    setup = ExperimentSetup(nonlinearity=heat, coupling=CouplingMatrix.zero(1), forcing=Forcing.zero(1),
                            initial=sine_initial, K=16, N=5, T=0.1)
    (report,) = refinement_study(setup, {"dt": [0.02, 0.01, 0.005]})
    assert report.axis == "dt"
    assert len(report.differences) == 2
    assert report.passed
    assert 1.5 < report.details["difference_ratios"][0] < 3.0


def test_heat_scenario_refinement_decreases():
    """Bundled heat scenario: Cauchy differences strictly decrease over three dt and three h levels."""
    cfg = load_run_config(SCENARIOS / "heat.yaml")
    assert cfg.study.axes == {"dt": [0.004, 0.002, 0.001], "h": [0.125, 0.0625, 0.03125]}
    reports = refinement_study(build_setup(cfg), cfg.study.axes)
    assert [r.axis for r in reports] == ["dt", "h"]
    for report in reports:
        assert len(report.differences) == 2
        assert report.differences[1] < report.differences[0]
        assert report.passed


def test_refinement_axis_order_and_orientation(heat_setup):
    """Axes run in the order dt, M, h, eps; levels are reoriented to refine."""
    reports = refinement_study(replace(heat_setup, M=2, epsilon=0.1),
                               {"eps": [0.025, 0.05, 0.1], "h": [0.25, 0.125]})
    assert [r.axis for r in reports] == ["h", "eps"]
    eps = reports[1]
    assert eps.points == [0.1, 0.05, 0.025]
    ratios = eps.details["spread_over_eps"]
    assert ratios[1] == pytest.approx(ratios[0], rel=1e-3)
    assert ratios[2] == pytest.approx(ratios[0], rel=1e-3)
    assert eps.passed


def test_refinement_preconditions(heat_setup):
    with pytest.raises(ConfigurationError):
        refinement_study(heat_setup, {"dt": [0.01]})
    with pytest.raises(ConfigurationError):
        refinement_study(heat_setup, {"omega": [1, 2]})
    with pytest.raises(ConfigurationError):
        refinement_study(heat_setup, {"h": [0.1, 0.05, 0.1]})


def test_reports(tmp_path):
    """Summaries sort messages by severity; reports land as json, txt and csv."""
    import pandas as pd
    summary = new_summary()
    add_verdict(summary, True, "fine")
    add_verdict(summary, False, "soft", critical=False)
    add_verdict(summary, False, "hard")
    assert summary == {"ok": ["fine"], "warning": ["soft"], "critical": ["hard"]}
    text = render_summary(summary)
    assert text.index("hard") < text.index("soft") < text.index("fine")
    paths = write_report(tmp_path, "demo", {"value": np.float64(1.5), "arr": np.arange(3)},
                         pd.DataFrame({"a": [1.0, 2.0]}), title="Demo")
    assert json.loads(paths["json"].read_text())["arr"] == [0, 1, 2]
    assert paths["csv"].exists()
    assert "Demo" in paths["txt"].read_text()
