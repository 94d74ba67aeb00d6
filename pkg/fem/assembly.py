"""
Assembly for the P1 Galerkin space V^h_m: mass and stiffness matrices over
interior nodes, load vectors, L2 projection, inner products and norms.

All spatial integrals use composite Gauss-Legendre quadrature per element
(two points by default, exact for products of P1 functions).
"""

import logging
from functools import lru_cache

import numpy as np

from errors import ConfigurationError, NumericalError
from fem.banded import BandedMatrix
from fem.fields import FeField
from fem.mesh import Mesh1D

logger = logging.getLogger(__name__)

DEFAULT_QUAD_POINTS = 2


@lru_cache(maxsize=16)
def gauss_rule(points: int = DEFAULT_QUAD_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to the reference element [0, 1]."""
    if points < 1:
        raise ConfigurationError(f"Quadrature needs at least one point, got {points}")
    xi, w = np.polynomial.legendre.leggauss(points)
    s, w = 0.5 * (xi + 1.0), 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


@lru_cache(maxsize=64)
def assemble_mass_matrix(mesh: Mesh1D) -> BandedMatrix:
    """Tridiagonal mass matrix M_ij = (phi_i, phi_j) over interior nodes."""
    L = mesh.lengths
    diag = (L[:-1] + L[1:]) / 3.0
    off = L[1:-1] / 6.0
    return BandedMatrix.tridiagonal(off, diag, off)


@lru_cache(maxsize=64)
def assemble_stiffness_matrix(mesh: Mesh1D) -> BandedMatrix:
    """Tridiagonal stiffness matrix S_ij = (phi_i', phi_j') over interior nodes."""
    inv = 1.0 / mesh.lengths
    diag = inv[:-1] + inv[1:]
    off = -inv[1:-1]
    return BandedMatrix.tridiagonal(off, diag, off)


def load_vector(mesh: Mesh1D, nodal: np.ndarray) -> np.ndarray:
    """(F_h, phi_j) for the P1 interpolant F_h of nodal data of shape (K+1, m).

    Boundary nodal values contribute; the result lives on interior nodes.
    """
    nodal = np.asarray(nodal, dtype=float)
    if nodal.ndim == 1:
        nodal = nodal[:, None]
    if nodal.shape[0] != mesh.n_interior + 2:
        raise ConfigurationError(f"Nodal data has {nodal.shape[0]} rows, mesh has {mesh.n_interior + 2} nodes")
    L = mesh.lengths[:, None]
    left = L[:-1] * (nodal[:-2] + 2.0 * nodal[1:-1]) / 6.0
    right = L[1:] * (2.0 * nodal[1:-1] + nodal[2:]) / 6.0
    return left + right


def _quadrature_points(mesh: Mesh1D, points: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical Gauss points (E, q), weights (E, q) and reference coordinates (q,)."""
    s, w = gauss_rule(points)
    x = mesh.nodes[:-1, None] + mesh.lengths[:, None] * s[None, :]
    wq = mesh.lengths[:, None] * w[None, :]
    return x, wq, s


def _evaluate_function(f, x: np.ndarray) -> np.ndarray:
    """Call f on a flat point array and return shape (points, m)."""
    vals = np.asarray(f(x.ravel()), dtype=float)
    if vals.ndim == 0:
        vals = np.full(x.size, float(vals))
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != x.size:
        raise ConfigurationError(f"Function returned {vals.shape[0]} values for {x.size} points")
    return vals


def function_load_vector(mesh: Mesh1D, f, points: int | None = None) -> np.ndarray:
    """(f, phi_j) by composite Gauss quadrature; f maps x -> (len(x), m)."""
    x, wq, s = _quadrature_points(mesh, points or DEFAULT_QUAD_POINTS)
    vals = _evaluate_function(f, x).reshape(x.shape + (-1,))
    # element e carries the right half of hat e and the left half of hat e+1
    right_hat = np.einsum("eq,q,eqc->ec", wq, s, vals)
    left_hat = np.einsum("eq,q,eqc->ec", wq, 1.0 - s, vals)
    return right_hat[:-1] + left_hat[1:]


def l2_project(mesh: Mesh1D, f, points: int | None = None) -> FeField:
    """Orthogonal L2 projection of f onto V^h_m (homogeneous Dirichlet)."""
    b = function_load_vector(mesh, f, points)
    M = assemble_mass_matrix(mesh)
    try:
        coeffs = M.solve(b)
    except NumericalError as e:
        raise NumericalError(f"L2 projection failed, mass matrix defective: {e}") from e
    return FeField(mesh, coeffs)


def mass_inner(mesh: Mesh1D, a: np.ndarray, b: np.ndarray) -> float:
    """Sum over components of a_c^T M b_c for coefficient arrays."""
    return float(np.sum(a * assemble_mass_matrix(mesh).matvec(b)))


def l2_inner(a: FeField, b: FeField) -> float:
    a.check_compatible(b)
    return mass_inner(a.mesh, a.coeffs, b.coeffs)


def l2_norm(a: FeField) -> float:
    return float(np.sqrt(max(mass_inner(a.mesh, a.coeffs, a.coeffs), 0.0)))


def l2_error(field: FeField, f, points: int = 5) -> float:
    """||u_h - f||_{L2} by composite Gauss quadrature."""
    x, wq, s = _quadrature_points(field.mesh, points)
    vals = _evaluate_function(f, x).reshape(x.shape + (-1,))
    nodal = field.nodal_values()
    uh = nodal[:-1, None, :] * (1.0 - s)[None, :, None] + nodal[1:, None, :] * s[None, :, None]
    if vals.shape[-1] != uh.shape[-1]:
        vals = np.broadcast_to(vals, uh.shape)
    return float(np.sqrt(np.sum(wq[:, :, None] * (uh - vals) ** 2)))


def quadrature_norm_squared(field: FeField, points: int = DEFAULT_QUAD_POINTS) -> float:
    """Composite Gauss quadrature of |u_h|^2."""
    x, wq, s = _quadrature_points(field.mesh, points)
    nodal = field.nodal_values()
    uh = nodal[:-1, None, :] * (1.0 - s)[None, :, None] + nodal[1:, None, :] * s[None, :, None]
    return float(np.sum(wq[:, :, None] * uh ** 2))
