"""
Weak residual of a computed solution against a finite family of
space-time test fields psi_j(x) theta_k(t) e_c.

psi_j are interior space hats, theta_k are time hats on a coarsened grid
that vanish at t = T. For a trajectory the flux is a(Du~); for an
ensemble it is the measure moment <nu, a> and the state is the mean field.
"""

import logging
from dataclasses import dataclass

import numpy as np

from config import get_analysis_config
from ensemble.runner import EnsembleResult
from errors import ConfigurationError
from fem.assembly import assemble_mass_matrix
from fem.mesh import Mesh1D
from stepper.scheme import CouplingMatrix
from stepper.solver import element_flux, flux_divergence
from stepper.trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestFamily:
    __test__ = False

    nodes: tuple[int, ...]        # interior node indices j
    components: tuple[int, ...]
    knots: tuple[int, ...]        # coarse time knots in step units, last one is N

    @classmethod
    def strided(cls, n_interior: int, N: int, m: int, stride: int | None = None) -> "TestFamily":
        stride = int(stride or get_analysis_config()["residual_stride"])
        if stride < 1:
            raise ConfigurationError(f"Test stride must be >= 1, got {stride}")
        knots = tuple(sorted(set(range(0, N, stride)) | {N}))
        return cls(nodes=tuple(range(0, n_interior, stride)), components=tuple(range(m)), knots=knots)

    def time_weights(self, N: int) -> np.ndarray:
        """theta_k at slab midpoints, shape (n_hats, N); hat k peaks at knots[k], k < last."""
        mids = np.arange(N) + 0.5
        knots = np.asarray(self.knots, dtype=float)
        if knots[-1] != N:
            raise ConfigurationError(f"Test knots end at {knots[-1]}, trajectory has N={N}")
        hats = np.zeros((len(knots) - 1, N))
        for k in range(len(knots) - 1):
            values = np.zeros(len(knots))
            values[k] = 1.0
            hats[k] = np.interp(mids, knots, values)
        return hats


@dataclass
class WeakResidualReport:
    tests: list[tuple[int, int, int]]   # (node j, component c, hat k)
    values: np.ndarray
    bounds: np.ndarray                  # tol * int theta_k dt

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def max_ratio(self) -> float:
        if not self.values.size:
            return 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.abs(self.values) / self.bounds
        return float(np.nanmax(np.where(self.bounds > 0, r, 0.0)))

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.values) <= self.bounds * (1.0 + 1e-9)))

    def to_dict(self) -> dict:
        return {"tests": len(self.tests), "max_abs": self.max_abs, "max_ratio": self.max_ratio,
                "passed": self.passed}


def residual_series(mesh: Mesh1D, B: CouplingMatrix, coeffs: np.ndarray, flux: np.ndarray,
                    loads: np.ndarray, dt: float) -> np.ndarray:
    """Step residuals R_i for i = 1..N given states (N+1, n, m) and elementwise flux (N+1, E, m)."""
    mass = assemble_mass_matrix(mesh)
    N = coeffs.shape[0] - 1
    out = np.empty((N,) + coeffs.shape[1:])
    for i in range(1, N + 1):
        r = mass.matvec(coeffs[i] - coeffs[i - 1]) / dt
        r += flux_divergence(flux[i])
        if not B.is_zero:
            r += mass.matvec(coeffs[i]) @ B.B.T
        out[i - 1] = r - loads[i - 1]
    return out


def _pair_with_tests(R: np.ndarray, dt: float, tol: float, family: TestFamily) -> WeakResidualReport:
    N = R.shape[0]
    hats = family.time_weights(N)
    tests, values, bounds = [], [], []
    for k in range(hats.shape[0]):
        weights = dt * hats[k]
        integral = float(weights.sum())
        for j in family.nodes:
            for c in family.components:
                tests.append((j, c, k))
                values.append(float(np.dot(weights, R[:, j, c])))
                bounds.append(tol * integral)
    return WeakResidualReport(tests=tests, values=np.asarray(values), bounds=np.asarray(bounds))


def weak_residual(subject, family: TestFamily | None = None, tol: float | None = None) -> WeakResidualReport:
    """Residual of a Trajectory or an EnsembleResult against the test family."""
    if isinstance(subject, Trajectory):
        mesh, coeffs, loads = subject.mesh, subject.coeffs, subject.loads
        flux = np.stack([element_flux(mesh, subject.nonlinearity, c) for c in coeffs])
        B = subject.coupling
    elif isinstance(subject, EnsembleResult):
        mesh, coeffs, loads = subject.mesh, subject.mean_coeffs, subject.loads
        flux = subject.flux_moments
        B = subject.coupling
    else:
        raise ConfigurationError(f"weak_residual needs a Trajectory or EnsembleResult, got {type(subject).__name__}")
    scheme = subject.scheme
    family = family or TestFamily.strided(mesh.n_interior, scheme.N, coeffs.shape[2])
    if max(family.nodes) >= mesh.n_interior or max(family.components) >= coeffs.shape[2]:
        raise ConfigurationError("Test family does not fit the subject's mesh or components")
    R = residual_series(mesh, B, coeffs, flux, loads, scheme.dt)
    report = _pair_with_tests(R, scheme.dt, tol if tol is not None else scheme.newton_tol, family)
    logger.info(f"Weak residual over {len(report.tests)} tests: max {report.max_abs:.3e} (ratio {report.max_ratio:.3g})")
    return report
