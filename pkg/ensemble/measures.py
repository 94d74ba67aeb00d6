"""
Empirical Young measures: equal-weight atoms of member gradients per
(recorded step, element), with a companion nodal measure of member states.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from errors import UnknownSiteError
from fem.mesh import Mesh1D


@dataclass(frozen=True, eq=False)
class EmpiricalYoungMeasure:
    mesh: Mesh1D
    record_steps: tuple[int, ...]
    gradients: np.ndarray   # (R, M, n_elements, m, 1)
    states: np.ndarray      # (R, M, K+1, m)

    @property
    def M(self) -> int:
        return self.gradients.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.M, 1.0 / self.M)

    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def sites(self) -> list[tuple[int, int]]:
        return [(i, e) for i in self.record_steps for e in range(self.mesh.n_elements)]

    def _row(self, step: int) -> int:
        try:
            return self.record_steps.index(int(step))
        except ValueError:
            raise UnknownSiteError(f"Step {step} was not recorded (recorded: {list(self.record_steps)})") from None

    def atoms(self, site: tuple[int, int]) -> np.ndarray:
        """Member gradients at (step, element), shape (M, m, 1), member order."""
        step, element = site
        row = self._row(step)
        if not 0 <= element < self.mesh.n_elements:
            raise UnknownSiteError(f"Element {element} outside 0..{self.mesh.n_elements - 1}")
        return self.gradients[row, :, element]

    def state_atoms(self, step: int, node: int) -> np.ndarray:
        """Member states at (step, node), shape (M, m)."""
        row = self._row(step)
        if not 0 <= node < self.states.shape[2]:
            raise UnknownSiteError(f"Node {node} outside 0..{self.states.shape[2] - 1}")
        return self.states[row, :, node]

    def step_gradients(self, step: int) -> np.ndarray:
        """All atoms at a recorded step, shape (M, n_elements, m, 1)."""
        return self.gradients[self._row(step)]


def ordered_mean(values: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the leading (member) axis, summed in member order."""
    acc = np.zeros(values.shape[1:])
    for v in values:
        acc = acc + v
    return acc / len(values)


def measure_moment(measure: EmpiricalYoungMeasure, g: Callable[[np.ndarray], np.ndarray],
                   site: tuple[int, int]):
    """<nu_site, g> = (1/M) sum_k g(atom_k); g takes a batch (M, m, 1)."""
    vals = np.asarray(g(measure.atoms(site)), dtype=float)
    if vals.ndim == 0:
        vals = np.full(measure.M, float(vals))
    out = ordered_mean(vals)
    return float(out) if out.ndim == 0 else out


def moment_field(measure: EmpiricalYoungMeasure, g: Callable[[np.ndarray], np.ndarray], step: int) -> np.ndarray:
    """<nu, g> on every element at a recorded step; g takes (M, n_elements, m, 1)."""
    vals = np.asarray(g(measure.step_gradients(step)), dtype=float)
    return ordered_mean(vals)


def measure_spread(measure: EmpiricalYoungMeasure) -> dict[int, float]:
    """Largest atom range max_k - min_k over elements and entries, per recorded step."""
    spread = {}
    for row, step in enumerate(measure.record_steps):
        g = measure.gradients[row]
        spread[step] = float(np.max(g.max(axis=0) - g.min(axis=0))) if g.size else 0.0
    return spread
