"""
Nonlinear solve for one implicit Euler step

    M (c - c_prev) / dt + A(c) + M c B^T = L

where A(c)_j = int a(Du) . phi_j' dx is the assembled flux term and L the
load of the averaged forcing. Newton with a coloured finite-difference
Jacobian and Armijo damping; a fixed-point iteration takes over when the
Jacobian is singular or the line search stalls.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError, NonConvergenceError, NonlinearityEvaluationError, NumericalError
from fem.assembly import assemble_mass_matrix, load_vector
from fem.banded import BandedMatrix
from fem.fields import FeField, element_slopes
from fem.mesh import Mesh1D
from nonlinearity.registry import Nonlinearity, a_eval
from stepper.scheme import CouplingMatrix, SchemeConfig

logger = logging.getLogger(__name__)

_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))
_ARMIJO = 1e-4
_MIN_STEP = 1e-10
_DIVERGENCE_FACTOR = 1e8


@dataclass
class StepStats:
    iterations: int
    residual: float
    method: str = "newton"


def element_flux(mesh: Mesh1D, nl: Nonlinearity, coeffs: np.ndarray) -> np.ndarray:
    """a(Du) per element, shape (n_elements, m)."""
    slopes = element_slopes(mesh, coeffs)
    return a_eval(nl, slopes[:, :, None])[:, :, 0]


def flux_divergence(flux: np.ndarray) -> np.ndarray:
    """int a(Du) . phi_j' dx from elementwise flux: left element minus right element."""
    return flux[:-1] - flux[1:]


class StepSystem:
    """Residual and Jacobian of one step on a fixed mesh."""

    def __init__(self, mesh: Mesh1D, nl: Nonlinearity, B: CouplingMatrix, dt: float):
        if nl.m is not None and nl.m != B.m:
            raise ConfigurationError(f"Coupling is {B.m}x{B.m}, nonlinearity expects {nl.m} components")
        self.mesh = mesh
        self.nl = nl
        self.B = B
        self.dt = dt
        self.mass = assemble_mass_matrix(mesh)
        self.m = B.m
        self.n = mesh.n_interior

    def residual(self, c: np.ndarray, c_prev: np.ndarray, load: np.ndarray) -> np.ndarray:
        r = self.mass.matvec(c - c_prev) / self.dt
        r += flux_divergence(element_flux(self.mesh, self.nl, c))
        if not self.B.is_zero:
            r += self.mass.matvec(c) @ self.B.B.T
        return r - load

    def jacobian(self, c: np.ndarray, c_prev: np.ndarray, load: np.ndarray,
                 r0: np.ndarray) -> BandedMatrix:
        """Finite-difference Jacobian in node-major ordering x = c.ravel().

        Row node i only sees nodes i-1, i, i+1, so nodes are coloured mod 3
        and one residual evaluation yields a column per node of the colour.
        """
        n, m = self.n, self.m
        band = 2 * m - 1
        ab = np.zeros((2 * band + 1, n * m))
        comps = np.arange(m)
        for colour in range(3):
            nodes = np.arange(colour, n, 3)
            if not len(nodes):
                continue
            for comp in range(m):
                delta = _SQRT_EPS * (1.0 + np.abs(c[nodes, comp]))
                pert = c.copy()
                pert[nodes, comp] += delta
                delta = pert[nodes, comp] - c[nodes, comp]
                dr = self.residual(pert, c_prev, load) - r0
                cols = nodes * m + comp
                for shift in (-1, 0, 1):
                    rows_node = nodes + shift
                    ok = (rows_node >= 0) & (rows_node < n)
                    if not ok.any():
                        continue
                    rn = rows_node[ok]
                    rows = rn[:, None] * m + comps[None, :]
                    col = cols[ok][:, None]
                    ab[band + rows - col, np.broadcast_to(col, rows.shape)] = dr[rn] / delta[ok][:, None]
        return BandedMatrix(ab, band, band)

    def fixed_point_map(self, c: np.ndarray, c_prev: np.ndarray, load: np.ndarray) -> np.ndarray:
        """c -> M^{-1} [M c_prev + dt (L - A(c))] (I + dt B^T)^{-1}."""
        rhs = self.mass.matvec(c_prev) + self.dt * (load - flux_divergence(element_flux(self.mesh, self.nl, c)))
        y = self.mass.solve(rhs)
        if self.B.is_zero:
            return y
        right = np.eye(self.m) + self.dt * self.B.B.T
        return np.linalg.solve(right.T, y.T).T


def _sup(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def _newton(system: StepSystem, c: np.ndarray, c_prev: np.ndarray, load: np.ndarray,
            cfg: SchemeConfig) -> tuple[np.ndarray, StepStats, str | None]:
    """Damped Newton. Returns (iterate, stats, failure reason or None)."""
    r = system.residual(c, c_prev, load)
    res = _sup(r)
    for it in range(cfg.max_newton_iters + 1):
        if res <= cfg.newton_tol:
            return c, StepStats(iterations=it, residual=res, method="newton"), None
        if it == cfg.max_newton_iters:
            break
        try:
            J = system.jacobian(c, c_prev, load, r)
            d = J.solve(-r.ravel()).reshape(c.shape)
        except NumericalError as e:
            return c, StepStats(iterations=it, residual=res), f"singular Jacobian ({e})"

        norm0 = float(np.linalg.norm(r))
        lam = 1.0
        while True:
            trial = c + lam * d
            try:
                r_trial = system.residual(trial, c_prev, load)
                ok = np.all(np.isfinite(r_trial))
            except NonlinearityEvaluationError:
                ok = False
            if ok and float(np.linalg.norm(r_trial)) <= (1.0 - _ARMIJO * lam) * norm0:
                break
            lam *= cfg.damping
            if lam < _MIN_STEP:
                return c, StepStats(iterations=it, residual=res), "line search stalled"
        c, r = trial, r_trial
        res = _sup(r)
        logger.debug(f"newton it={it + 1} lambda={lam:.3g} residual={res:.3e}")
    return c, StepStats(iterations=cfg.max_newton_iters, residual=res), "iteration limit"


def _fixed_point(system: StepSystem, c: np.ndarray, c_prev: np.ndarray, load: np.ndarray,
                 cfg: SchemeConfig) -> tuple[np.ndarray, StepStats]:
    r = system.residual(c, c_prev, load)
    res = _sup(r)
    start = max(res, cfg.newton_tol)
    for it in range(cfg.max_fixed_point_iters + 1):
        if res <= cfg.newton_tol:
            return c, StepStats(iterations=it, residual=res, method="fixed_point")
        if it == cfg.max_fixed_point_iters or not np.isfinite(res) or res > _DIVERGENCE_FACTOR * start:
            break
        try:
            c = system.fixed_point_map(c, c_prev, load)
            r = system.residual(c, c_prev, load)
            res = _sup(r)
        except (NumericalError, NonlinearityEvaluationError) as e:
            logger.warning(f"fixed-point iteration aborted: {e}")
            res = float("inf")
            break
    raise NonConvergenceError(res, it, method="fixed_point")


def solve_step(system: StepSystem, c_prev: np.ndarray, load: np.ndarray, cfg: SchemeConfig,
               guess: np.ndarray | None = None) -> tuple[np.ndarray, StepStats]:
    """Solve one step; raises NonConvergenceError when every method fails."""
    c0 = np.array(c_prev if guess is None else guess, dtype=float)
    c, stats, failure = _newton(system, c0, c_prev, load, cfg)
    if failure is None:
        return c, stats
    if not cfg.fallback_fixed_point:
        raise NonConvergenceError(stats.residual, stats.iterations, method="newton")
    logger.warning(f"Newton failed ({failure}, residual={stats.residual:.3e}); switching to fixed point")
    return _fixed_point(system, c0, c_prev, load, cfg)


def step_residual(mesh: Mesh1D, nl: Nonlinearity, B: CouplingMatrix, u_prev: FeField,
                  u_next: FeField, load: np.ndarray, dt: float) -> np.ndarray:
    """Assembled weak residual of one step, shape (n_interior, m)."""
    u_prev.check_compatible(u_next)
    return StepSystem(mesh, nl, B, dt).residual(u_next.coeffs, u_prev.coeffs, load)


def as_load(mesh: Mesh1D, F_next: np.ndarray) -> np.ndarray:
    """Accept nodal forcing values (K+1, m) or an assembled load (n_interior, m)."""
    F_next = np.asarray(F_next, dtype=float)
    if F_next.ndim == 1:
        F_next = F_next[:, None]
    if F_next.shape[0] == mesh.n_interior + 2:
        return load_vector(mesh, F_next)
    if F_next.shape[0] == mesh.n_interior:
        return F_next
    raise ConfigurationError(f"Forcing data of shape {F_next.shape} fits neither nodes nor interior nodes")


def implicit_euler_step(mesh: Mesh1D, nl: Nonlinearity, B: CouplingMatrix, u_i: FeField,
                        F_next: np.ndarray, cfg: SchemeConfig,
                        system: StepSystem | None = None) -> tuple[FeField, StepStats]:
    """Advance one step. F_next holds nodal values of the averaged forcing or its load.

    The accepted iterate is re-checked against an independently assembled
    residual before it is returned.
    """
    if not u_i.mesh.same_as(mesh):
        raise ConfigurationError("Initial field lives on another mesh")
    system = system or StepSystem(mesh, nl, B, cfg.dt)
    load = as_load(mesh, F_next)
    c, stats = solve_step(system, u_i.coeffs, load, cfg)
    check = _sup(step_residual(mesh, nl, B, u_i, FeField(mesh, c), load, cfg.dt))
    if not check <= cfg.newton_tol:
        raise NonConvergenceError(check, stats.iterations, method=stats.method)
    stats.residual = check
    return FeField(mesh, c), stats
