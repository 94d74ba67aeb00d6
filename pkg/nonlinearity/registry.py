"""
Diffusion nonlinearities a(A) = K(A) A and the name registry used by
run configurations.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional

import numpy as np

from errors import ConfigurationError, NonlinearityEvaluationError
from nonlinearity.growth import GrowthParams, example2_growth_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Nonlinearity:
    """Evaluator for K and a = K * A on batches of m x n matrices.

    `kernel` maps an array of shape (..., m, n) to K values of shape (...).
    `coverage` (optional) maps the same batch to a boolean mask of points
    inside the regime the growth theory covers.
    """
    name: str
    kernel: Callable[[np.ndarray], np.ndarray]
    m: Optional[int] = None
    n: int = 1
    params: Optional[GrowthParams] = None
    theory_covered: bool = True
    coverage: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def K(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        return np.asarray(self.kernel(A), dtype=float)

    def a(self, A) -> np.ndarray:
        return a_eval(self, A)

    def is_covered(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        if self.coverage is None:
            return np.full(A.shape[:-2], self.theory_covered, dtype=bool)
        return np.asarray(self.coverage(A), dtype=bool)


def a_eval(nl: Nonlinearity, A) -> np.ndarray:
    """a(A) = K(A) * A entrywise; batches of shape (..., m, n) allowed."""
    A = np.asarray(A, dtype=float)
    if A.ndim < 2:
        raise ConfigurationError(f"a_eval expects m x n matrices, got shape {A.shape}")
    if nl.m is not None and A.shape[-2] != nl.m:
        raise ConfigurationError(f"{nl.name} expects {nl.m} rows, got {A.shape[-2]}")
    K = nl.K(A)
    flat_K = np.reshape(K, -1)
    bad = ~np.isfinite(flat_K)
    if bad.any():
        i = int(np.argmax(bad))
        flat_A = A.reshape((-1,) + A.shape[-2:])
        raise NonlinearityEvaluationError(flat_A[i], value=float(flat_K[i]))
    return K[..., None, None] * A


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _as_becu_batch(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape == (3,):
        A = A[:, None]
    if A.shape[-2:] != (3, 1):
        raise ConfigurationError(f"Stability function needs 3 x 1 gradients, got {A.shape}")
    return A


def becu_kernel(A: np.ndarray) -> np.ndarray:
    """Boundary-layer stability function, vectorized over leading axes.

    A3 > 0:  (A1^2 + A2^2)^(3/2) / (A1^2 + A2^2 + A3)
    A3 <= 0: sqrt(A1^2 + A2^2 - A3)
    """
    A = _as_becu_batch(A)
    a1, a2, a3 = A[..., 0, 0], A[..., 1, 0], A[..., 2, 0]
    s2 = a1 ** 2 + a2 ** 2
    stable = a3 > 0.0
    denom = np.where(stable, s2 + a3, 1.0)
    upper = np.where(stable, s2 ** 1.5 / denom, 0.0)
    lower = np.sqrt(np.where(stable, 0.0, s2 - a3))
    return np.where(stable, upper, lower)


def becu_coverage(A: np.ndarray) -> np.ndarray:
    """The growth theory only covers the A3 <= 0 branch."""
    A = _as_becu_batch(A)
    return A[..., 2, 0] <= 0.0


def becu_stability(A) -> float:
    """K for a single 3 x 1 gradient; the origin resolves to the A3 <= 0 branch (K = 0)."""
    return float(becu_kernel(_as_becu_batch(A)))


def example2_kernel(A: np.ndarray) -> np.ndarray:
    A = _as_becu_batch(A)
    return np.sqrt(A[..., 0, 0] ** 2 + A[..., 1, 0] ** 2 + np.abs(A[..., 2, 0]))


def example2_K(A) -> float:
    """K = sqrt(A1^2 + A2^2 + |A3|) for a single 3 x 1 gradient."""
    return float(example2_kernel(_as_becu_batch(A)))


def _power_law_kernel(params: GrowthParams, A: np.ndarray) -> np.ndarray:
    return params.bound_sum(A)


def power_law(params: GrowthParams, validate: bool = True) -> Nonlinearity:
    """K(A) = sum_i (mu_i^2 + |A_i|^2)^((p_i - 2)/2); saturates the sandwich with c0 = c1 = 1.

    Run configurations validate params themselves (and may downgrade
    violations to warnings), so the registry factory passes validate=False.
    """
    if validate:
        params.validate()
    canonical = GrowthParams(m=params.m, n=params.n, p=params.p, mu=params.mu, c0=1.0, c1=1.0)
    return Nonlinearity(name="power_law", kernel=partial(_power_law_kernel, canonical),
                        m=params.m, n=params.n, params=canonical)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def _make_power_law(params: Optional[GrowthParams], m: int) -> Nonlinearity:
    if params is None:
        params = GrowthParams(m=m, n=1, p=(2.0,) * m, mu=(0.0,) * m)
    return power_law(params, validate=False)


def _make_becu(params: Optional[GrowthParams], m: int) -> Nonlinearity:
    return Nonlinearity(name="becu", kernel=becu_kernel, m=3, params=params,
                        theory_covered=False, coverage=becu_coverage)


def _make_example2(params: Optional[GrowthParams], m: int) -> Nonlinearity:
    return Nonlinearity(name="example2", kernel=example2_kernel, m=3,
                        params=params or example2_growth_params())


# Name -> factory(params, m) mapping
NONLINEARITIES: dict[str, Callable[[Optional[GrowthParams], int], Nonlinearity]] = {
    "power_law": _make_power_law,
    "becu": _make_becu,
    "example2": _make_example2,
}


def get_nonlinearity(name: str, params: Optional[GrowthParams] = None, m: int = 1) -> Nonlinearity:
    """Instantiate a registered nonlinearity."""
    factory = NONLINEARITIES.get(name)
    if factory is None:
        raise ConfigurationError(f"Unknown nonlinearity '{name}' (known: {', '.join(sorted(NONLINEARITIES))})")
    return factory(params, m)


def register_nonlinearity(name: str, factory: Callable[[Optional[GrowthParams], int], Nonlinearity]) -> None:
    """Register a new name -> factory mapping."""
    NONLINEARITIES[name] = factory
    logger.info(f"Registered nonlinearity: {name}")
