"""
P1 finite-element fields with homogeneous Dirichlet boundary values
and their elementwise-constant gradients.
"""

from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError, MeshMismatchError
from fem.mesh import Mesh1D


@dataclass(frozen=True, eq=False)
class FeField:
    """m-component P1 function; coefficients live on interior nodes only."""
    mesh: Mesh1D
    coeffs: np.ndarray  # shape (n_interior, m)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] != self.mesh.n_interior:
            raise ConfigurationError(
                f"Coefficient array {c.shape} does not match {self.mesh.n_interior} interior nodes"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, mesh: Mesh1D, m: int) -> "FeField":
        return cls(mesh, np.zeros((mesh.n_interior, m)))

    @property
    def m(self) -> int:
        return self.coeffs.shape[1]

    def nodal_values(self) -> np.ndarray:
        """Values at all K+1 nodes, boundary rows identically zero."""
        vals = np.zeros((self.mesh.n_interior + 2, self.m))
        vals[1:-1] = self.coeffs
        return vals

    def check_compatible(self, other: "FeField") -> None:
        if not self.mesh.same_as(other.mesh):
            raise MeshMismatchError("Fields live on different meshes")
        if self.m != other.m:
            raise MeshMismatchError(f"Component counts differ: {self.m} vs {other.m}")

    def __add__(self, other: "FeField") -> "FeField":
        self.check_compatible(other)
        return FeField(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other: "FeField") -> "FeField":
        self.check_compatible(other)
        return FeField(self.mesh, self.coeffs - other.coeffs)

    def scaled(self, factor: float) -> "FeField":
        return FeField(self.mesh, factor * self.coeffs)


@dataclass(frozen=True, eq=False)
class ElementGradient:
    """Per-element m x n gradient matrices (n = 1)."""
    mesh: Mesh1D
    values: np.ndarray  # shape (n_elements, m, 1)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0


def element_slopes(mesh: Mesh1D, coeffs: np.ndarray) -> np.ndarray:
    """Difference quotients (u_right - u_left) / length, shape (n_elements, m)."""
    m = coeffs.shape[1]
    padded = np.zeros((mesh.n_interior + 2, m))
    padded[1:-1] = coeffs
    return np.diff(padded, axis=0) / mesh.lengths[:, None]


def gradient(field: FeField) -> ElementGradient:
    """Exact gradient of a P1 field: constant per element."""
    slopes = element_slopes(field.mesh, field.coeffs)
    return ElementGradient(field.mesh, slopes[:, :, None])


def evaluate(field: FeField, x) -> np.ndarray:
    """Point values of the P1 interpolant, shape (len(x), m)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = field.mesh.domain
    if np.any(x < lo) or np.any(x > hi):
        raise ConfigurationError(f"Evaluation points outside [{lo}, {hi}]")
    vals = field.nodal_values()
    return np.stack([np.interp(x, field.mesh.nodes, vals[:, c]) for c in range(field.m)], axis=1)
