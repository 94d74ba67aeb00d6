"""
Right-hand sides F(t, x) and their slab averages
F_i = (1/dt) * int_{t_{i-1}}^{t_i} F(t, .) dt at the mesh nodes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from errors import ConfigurationError
from fem.assembly import load_vector
from fem.mesh import Mesh1D


@dataclass(frozen=True, eq=False)
class Forcing:
    """Closed-form F(t, x) -> (len(x), m), or per-slab nodal data of shape (N, K+1, m)."""
    m: int
    evaluator: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    slabs: Optional[np.ndarray] = None
    label: str = "custom"

    def __post_init__(self):
        if (self.evaluator is None) == (self.slabs is None):
            raise ConfigurationError("Forcing needs exactly one of evaluator or slabs")
        if self.slabs is not None:
            s = np.array(self.slabs, dtype=float)
            if s.ndim != 3 or s.shape[2] != self.m:
                raise ConfigurationError(f"Forcing slabs must be (N, K+1, {self.m}), got {s.shape}")
            s.setflags(write=False)
            object.__setattr__(self, "slabs", s)

    @classmethod
    def zero(cls, m: int) -> "Forcing":
        return cls(m=m, evaluator=lambda t, x: np.zeros((len(x), m)), label="zero")

    @classmethod
    def constant(cls, value) -> "Forcing":
        vec = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(m=len(vec), evaluator=lambda t, x: np.tile(vec, (len(x), 1)),
                   label=f"constant{tuple(vec.tolist())}")

    @classmethod
    def from_expression(cls, fn: Callable[[float, np.ndarray], np.ndarray], m: int,
                        label: str = "expression") -> "Forcing":
        return cls(m=m, evaluator=fn, label=label)

    @classmethod
    def from_slabs(cls, slabs) -> "Forcing":
        s = np.asarray(slabs, dtype=float)
        if s.ndim == 2:
            s = s[:, :, None]
        return cls(m=s.shape[2], slabs=s, label="slabs")

    @property
    def is_zero(self) -> bool:
        return self.label == "zero"

    def nodal(self, t: float, mesh: Mesh1D) -> np.ndarray:
        """F(t, x_j) at all nodes, shape (K+1, m)."""
        if self.evaluator is None:
            raise ConfigurationError("Slab forcing has no pointwise values")
        vals = np.asarray(self.evaluator(float(t), mesh.nodes), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return np.broadcast_to(vals, (len(mesh.nodes), self.m)).copy()


def average_forcing(F: Forcing, mesh: Mesh1D, i: int, dt: float, points: int = 4) -> np.ndarray:
    """Nodal values of F_i on the slab (t_{i-1}, t_i], shape (K+1, m).

    Gauss-Legendre in time with `points` nodes; exact for F polynomial
    in t of degree < 2 * points.
    """
    if i < 1:
        raise ConfigurationError(f"Forcing slabs are indexed from 1, got {i}")
    if F.slabs is not None:
        if i > len(F.slabs):
            raise ConfigurationError(f"Forcing has {len(F.slabs)} slabs, step {i} requested")
        if F.slabs.shape[1] != len(mesh.nodes):
            raise ConfigurationError("Forcing slabs do not match the mesh")
        return F.slabs[i - 1].copy()
    xi, w = np.polynomial.legendre.leggauss(points)
    t0 = (i - 1) * dt
    acc = np.zeros((len(mesh.nodes), F.m))
    for s, weight in zip(0.5 * (xi + 1.0), 0.5 * w):
        acc += weight * F.nodal(t0 + s * dt, mesh)
    return acc


def forcing_load(F: Forcing, mesh: Mesh1D, i: int, dt: float, points: int = 4) -> np.ndarray:
    """(F_i, phi_j) for interior nodes j, shape (n_interior, m)."""
    return load_vector(mesh, average_forcing(F, mesh, i, dt, points))
