"""Tests for implicit Euler stepping, forcing averages and time interpolants."""

import math

import joblib
import numpy as np
import pandas as pd
import pytest
import scipy.linalg

from errors import ConfigurationError, DomainError, NonConvergenceError
from fem.assembly import assemble_mass_matrix, assemble_stiffness_matrix, l2_error, l2_norm, l2_project
from fem.fields import FeField
from fem.mesh import build_uniform_mesh
from nonlinearity.growth import GrowthParams
from nonlinearity.registry import power_law
from stepper.advisory import contraction_factor, max_stable_dt_advisory
from stepper.export import export_trajectory
from stepper.forcing import Forcing, average_forcing
from stepper.scheme import CouplingMatrix, SchemeConfig
from stepper.solver import StepSystem, as_load, implicit_euler_step, solve_step, step_residual
from stepper.trajectory import interpolant_constant, interpolant_linear, run_trajectory
from tests.conftest import becu_initial, sine_initial


def test_scheme_config_validation():
    """dt, N and damping are checked on construction."""
    with pytest.raises(ConfigurationError):
        SchemeConfig(dt=0.0, N=10)
    with pytest.raises(ConfigurationError):
        SchemeConfig(dt=0.1, N=0)
    with pytest.raises(ConfigurationError):
        SchemeConfig(dt=0.1, N=3, damping=1.0)
    cfg = SchemeConfig.from_horizon(0.5, 10)
    assert cfg.dt == pytest.approx(0.05)
    assert cfg.T == pytest.approx(0.5)
    halved = cfg.with_dt(0.025)
    assert halved.N == 20
    assert halved.T == pytest.approx(0.5)


def test_coupling_matrix_positivity():
    """The rotation coupling is skew and passes B v . v >= 0; -I does not."""
    B = CouplingMatrix.becu_skew()
    assert B.is_skew
    assert B.check_positive()
    assert abs(B.min_quadratic_form()) < 1e-14
    assert not CouplingMatrix(-np.eye(2)).check_positive()
    assert CouplingMatrix.zero(3).is_zero


def test_average_forcing_constant():
    """Constant (-V, U, 0) averages to itself on every slab."""
    mesh = build_uniform_mesh(8)
    F = Forcing.constant([-1.0, 1.0, 0.0])
    for i in (1, 4, 17):
        np.testing.assert_allclose(average_forcing(F, mesh, i, 0.01), np.tile([-1.0, 1.0, 0.0], (9, 1)))


def test_average_forcing_linear_in_time():
    """F = t g(x) over [0, dt] averages to (dt/2) g."""
    mesh = build_uniform_mesh(8)
    F = Forcing.from_expression(lambda t, x: t * np.sin(np.pi * x)[:, None], m=1)
    dt = 0.1
    np.testing.assert_allclose(average_forcing(F, mesh, 1, dt)[:, 0], dt / 2 * np.sin(np.pi * mesh.nodes),
                               atol=1e-15)
    assert not np.any(average_forcing(Forcing.zero(2), mesh, 3, dt))
    with pytest.raises(ConfigurationError):
        average_forcing(F, mesh, 0, dt)


def test_slab_forcing():
    """Slabbed nodal data is returned as given."""
    mesh = build_uniform_mesh(4)
    slabs = np.arange(2 * 5, dtype=float).reshape(2, 5)
    F = Forcing.from_slabs(slabs)
    np.testing.assert_allclose(average_forcing(F, mesh, 2, 0.1)[:, 0], slabs[1])
    with pytest.raises(ConfigurationError):
        average_forcing(F, mesh, 3, 0.1)


def test_zero_is_exact_root(becu):
    """u_i = 0, F = 0: the step returns zero."""
    mesh = build_uniform_mesh(16)
    u, stats = implicit_euler_step(mesh, becu, CouplingMatrix.becu_skew(), FeField.zeros(mesh, 3),
                                   np.zeros((17, 3)), SchemeConfig(dt=1e-3, N=1))
    assert not np.any(u.coeffs)
    assert stats.iterations == 0


def test_becu_step_converges(becu):
    """Boundary-layer step at h = 1/32, dt = 1e-3 meets the residual contract."""
    mesh = build_uniform_mesh(32)
    cfg = SchemeConfig(dt=1e-3, N=1)
    B = CouplingMatrix.becu_skew()
    u0 = l2_project(mesh, becu_initial)
    F1 = average_forcing(Forcing.constant([-1.0, 1.0, 0.0]), mesh, 1, cfg.dt)
    u1, stats = implicit_euler_step(mesh, becu, B, u0, F1, cfg)
    res = step_residual(mesh, becu, B, u0, u1, as_load(mesh, F1), cfg.dt)
    assert np.max(np.abs(res)) <= cfg.newton_tol
    assert stats.residual <= cfg.newton_tol


def test_fixed_point_map_fixes_the_step_solution(becu):
    """The fallback map has the accepted step as a fixed point."""
    mesh = build_uniform_mesh(16)
    B = CouplingMatrix.becu_skew()
    cfg = SchemeConfig(dt=1e-3, N=1)
    system = StepSystem(mesh, becu, B, cfg.dt)
    u0 = l2_project(mesh, becu_initial)
    load = as_load(mesh, np.tile([-1.0, 1.0, 0.0], (17, 1)))
    c, _ = solve_step(system, u0.coeffs, load, cfg)
    np.testing.assert_allclose(system.fixed_point_map(c, u0.coeffs, load), c, atol=1e-9)


def test_fixed_point_fallback_after_newton_budget(heat):
    """A one-iteration Newton budget still ends below tolerance through the fallback."""
    mesh = build_uniform_mesh(8)
    cfg = SchemeConfig(dt=1e-4, N=1, max_newton_iters=1)
    system = StepSystem(mesh, heat, CouplingMatrix.zero(1), cfg.dt)
    u0 = l2_project(mesh, sine_initial)
    c, stats = solve_step(system, u0.coeffs, np.zeros_like(u0.coeffs), cfg)
    assert stats.residual <= cfg.newton_tol
    assert stats.method in ("newton", "fixed_point")


def test_nonconvergence_reports_step():
    """Without fallback a tiny Newton budget fails with step information."""
    nl = power_law(GrowthParams(m=1, n=1, p=(4.0,), mu=(0.0,)))
    mesh = build_uniform_mesh(16)
    cfg = SchemeConfig(dt=1e-3, N=3, max_newton_iters=1, fallback_fixed_point=False)
    with pytest.raises(NonConvergenceError) as exc:
        run_trajectory(mesh, nl, CouplingMatrix.zero(1), l2_project(mesh, sine_initial), Forcing.zero(1), cfg)
    assert exc.value.step == 1
    assert exc.value.final_residual > cfg.newton_tol


def test_single_step_trajectory(heat, heat_scheme):
    """N = 1 applies exactly one step."""
    mesh = build_uniform_mesh(8)
    cfg = SchemeConfig(dt=heat_scheme.dt, N=1)
    traj = run_trajectory(mesh, heat, CouplingMatrix.zero(1), l2_project(mesh, sine_initial), Forcing.zero(1), cfg)
    assert traj.N == 1
    assert len(traj.stats) == 1
    assert traj.coeffs.shape == (2, 7, 1)


def test_zero_data_stays_zero(becu):
    """F = 0, u0 = 0: every snapshot is zero."""
    mesh = build_uniform_mesh(8)
    traj = run_trajectory(mesh, becu, CouplingMatrix.becu_skew(), FeField.zeros(mesh, 3), Forcing.zero(3),
                          SchemeConfig(dt=1e-3, N=4))
    assert not np.any(traj.coeffs)


def test_trajectory_is_deterministic(becu_setup):
    """Identical inputs give bit-identical trajectories."""
    a = becu_setup.run_trajectory()
    b = becu_setup.run_trajectory()
    assert np.array_equal(a.coeffs, b.coeffs)


def test_heat_matches_exact_solution(heat):
    """Linear heat against e^{-pi^2 t} sin(pi x)."""
    mesh = build_uniform_mesh(32)
    cfg = SchemeConfig(dt=1e-3, N=50)
    traj = run_trajectory(mesh, heat, CouplingMatrix.zero(1), l2_project(mesh, sine_initial), Forcing.zero(1), cfg)
    exact = lambda xs: (math.exp(-np.pi ** 2 * cfg.T) * np.sin(np.pi * xs))[:, None]
    assert l2_error(traj.final, exact) < 1e-2
    norms = [np.sqrt(np.sum(c ** 2)) for c in traj.coeffs]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_interpolants(heat, heat_scheme):
    """Grid points, slab midpoints and the pre-history interval."""
    mesh = build_uniform_mesh(8)
    traj = run_trajectory(mesh, heat, CouplingMatrix.zero(1), l2_project(mesh, sine_initial),
                          Forcing.zero(1), heat_scheme)
    dt = traj.dt
    for i in (0, 3, traj.N):
        assert np.array_equal(interpolant_linear(traj, i * dt).coeffs, traj.coeffs[i])
        assert np.array_equal(interpolant_constant(traj, i * dt).coeffs, traj.coeffs[i])
    mid = interpolant_linear(traj, 0.5 * dt).coeffs
    np.testing.assert_allclose(mid, 0.5 * (traj.coeffs[0] + traj.coeffs[1]))
    assert np.array_equal(interpolant_constant(traj, 0.5 * dt).coeffs, traj.coeffs[1])
    assert np.array_equal(interpolant_constant(traj, -0.5 * dt).coeffs, traj.coeffs[0])
    with pytest.raises(DomainError):
        interpolant_linear(traj, -0.5 * dt)
    with pytest.raises(DomainError):
        interpolant_constant(traj, traj.T + dt)


def test_advisory_step():
    """No restriction at L = 0, inverse proportionality in L."""
    assert max_stable_dt_advisory(1 / 32, 0.0) == math.inf
    a1 = max_stable_dt_advisory(1 / 32, 1.0)
    a2 = max_stable_dt_advisory(1 / 32, 2.0)
    assert a2 == pytest.approx(a1 / 2)
    assert math.isfinite(a1)
    assert 0.0 < contraction_factor(1 / 32, 1.0, a1, 10) < 1.0


def test_export_trajectory(tmp_path, heat, heat_scheme):
    """CSV, JSON manifest and joblib dump are written."""
    mesh = build_uniform_mesh(4)
    traj = run_trajectory(mesh, heat, CouplingMatrix.zero(1), l2_project(mesh, sine_initial),
                          Forcing.zero(1), heat_scheme)
    paths = export_trajectory(traj, tmp_path / "traj", extra={"label": "heat"})
    frame = pd.read_csv(paths["csv"])
    assert len(frame) == traj.N + 1
    assert list(frame.columns[:3]) == ["step", "t", "u1[0]"]
    assert (frame["u1[0]"] == 0).all()
    dump = joblib.load(paths["joblib"])
    np.testing.assert_array_equal(dump["coeffs"], traj.coeffs)


def test_heat_step_matches_banded_solve(heat):
    """Linear heat: one step solves (M + dt S) u_1 = M u_0 exactly."""
    mesh = build_uniform_mesh(16)
    cfg = SchemeConfig(dt=2e-3, N=1, newton_tol=1e-12)
    u0 = l2_project(mesh, sine_initial)
    u1, _ = implicit_euler_step(mesh, heat, CouplingMatrix.zero(1), u0, np.zeros((17, 1)), cfg)
    M = assemble_mass_matrix(mesh)
    S = assemble_stiffness_matrix(mesh)
    direct = scipy.linalg.solve_banded((1, 1), M.ab + cfg.dt * S.ab, M.matvec(u0.coeffs))
    np.testing.assert_allclose(u1.coeffs, direct, rtol=0, atol=1e-12)


def test_heat_regression_at_reference_resolution(heat):
    """h = 1/64, dt = 1e-4, T = 0.1: L2 error <= 5e-3; time differences halve with dt."""
    mesh = build_uniform_mesh(64)
    u0 = l2_project(mesh, sine_initial)
    finals = {}
    for N in (250, 500, 1000):
        traj = run_trajectory(mesh, heat, CouplingMatrix.zero(1), u0, Forcing.zero(1), SchemeConfig.from_horizon(0.1, N))
        finals[N] = traj.final
    exact = lambda xs: (math.exp(-np.pi ** 2 * 0.1) * np.sin(np.pi * xs))[:, None]
    assert l2_error(finals[1000], exact) <= 5e-3
    coarse = l2_norm(finals[250] - finals[500])
    fine = l2_norm(finals[500] - finals[1000])
    assert 1.7 <= coarse / fine <= 2.3
