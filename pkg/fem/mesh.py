"""
Interval meshes for the P1 element.
Uniform by default; non-uniform meshes come from an explicit node list.
"""

from dataclasses import dataclass, field

import numpy as np

from errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Subdivision x_0 < ... < x_K of Omega = (x_0, x_K).

    Boundary nodes carry homogeneous Dirichlet values; unknowns live on
    the K-1 interior nodes.
    """
    nodes: np.ndarray
    lengths: np.ndarray = field(init=False, repr=False)
    boundary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise ConfigurationError(f"Mesh needs at least 2 elements, got {max(len(nodes) - 1, 0)}")
        if not np.all(np.isfinite(nodes)):
            raise ConfigurationError("Mesh nodes must be finite")
        lengths = np.diff(nodes)
        if np.any(lengths <= 0):
            raise ConfigurationError("Mesh nodes must be strictly increasing")

        boundary = np.zeros(len(nodes), dtype=bool)
        boundary[[0, -1]] = True
        for arr in (nodes, lengths, boundary):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "boundary", boundary)

    @property
    def n_elements(self) -> int:
        return len(self.nodes) - 1

    @property
    def n_interior(self) -> int:
        return len(self.nodes) - 2

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def h(self) -> float:
        """Largest element length."""
        return float(self.lengths.max())

    @property
    def h_min(self) -> float:
        return float(self.lengths.min())

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def measure(self) -> float:
        """|Omega|."""
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def same_as(self, other: "Mesh1D") -> bool:
        return self is other or (
            isinstance(other, Mesh1D)
            and self.nodes.shape == other.nodes.shape
            and bool(np.array_equal(self.nodes, other.nodes))
        )

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Element index containing each point (right end belongs to the last element)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)


def build_uniform_mesh(K: int, domain: tuple[float, float] = (0.0, 1.0)) -> Mesh1D:
    """Uniform mesh with K elements and spacing h = |Omega| / K."""
    if int(K) != K or K < 2:
        raise ConfigurationError(f"Uniform mesh needs K >= 2 elements, got {K}")
    a, b = float(domain[0]), float(domain[1])
    if not (np.isfinite(a) and np.isfinite(b)) or not b > a:
        raise ConfigurationError(f"Empty or invalid interval ({a}, {b})")
    nodes = a + (b - a) * np.arange(int(K) + 1) / int(K)
    nodes[-1] = b
    return Mesh1D(nodes)


def mesh_from_nodes(nodes) -> Mesh1D:
    """Mesh from an explicit node list (non-uniform spacing allowed)."""
    return Mesh1D(np.asarray(nodes, dtype=float))
