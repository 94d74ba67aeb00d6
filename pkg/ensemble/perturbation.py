"""
Random initial perturbations and the scalar inverse-transform sampler.

Member k draws from its own stream default_rng((seed, k)), so a member's
field depends only on (seed, k, law, mesh) and never on execution order.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from errors import ConfigurationError, DomainError
from fem.assembly import l2_norm
from fem.fields import FeField
from fem.mesh import Mesh1D

logger = logging.getLogger(__name__)

PERTURBATION_LAWS = ("uniform", "gaussian", "two_point")
_BISECTION_STEPS = 200


@dataclass(frozen=True, eq=False)
class ScalarLaw:
    """Probability law on the real line, given by a CDF or by atoms.

    Discrete laws keep (values, probs) and invert exactly; continuous laws
    either bring a closed-form quantile or are inverted by bisection of the
    CDF on [lower, upper].
    """
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lower: float = 0.0
    upper: float = 1.0
    quantile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    values: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    @classmethod
    def point_mass(cls, c: float) -> "ScalarLaw":
        return cls.discrete([c], [1.0])

    @classmethod
    def discrete(cls, values, probs) -> "ScalarLaw":
        v = np.asarray(values, dtype=float)
        p = np.asarray(probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or not len(v):
            raise ConfigurationError("Discrete law needs matching 1D values and probabilities")
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ConfigurationError(f"Probabilities must be nonnegative and sum to 1, got {p.tolist()}")
        order = np.argsort(v, kind="stable")
        return cls(lower=float(v.min()), upper=float(v.max()), values=v[order], probs=p[order])

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "ScalarLaw":
        if not b > a:
            raise ConfigurationError(f"Uniform law needs a < b, got [{a}, {b}]")
        return cls(cdf=lambda v: np.clip((v - a) / (b - a), 0.0, 1.0), lower=a, upper=b,
                   quantile=lambda w: a + (b - a) * w)

    @classmethod
    def from_cdf(cls, cdf: Callable[[np.ndarray], np.ndarray], lower: float, upper: float) -> "ScalarLaw":
        return cls(cdf=cdf, lower=float(lower), upper=float(upper))

    @property
    def is_discrete(self) -> bool:
        return self.values is not None


def inverse_cdf_sample(law: ScalarLaw, omega):
    """Generalized inverse F^{-1}(w) = inf{v : F(v) >= w} for w in [0, 1).

    Scalar input gives a float, arrays give arrays.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w < 0.0) or np.any(w >= 1.0):
        raise DomainError(f"Sampler levels must lie in [0, 1), got {omega}")
    if law.is_discrete:
        cum = np.cumsum(law.probs)
        idx = np.minimum(np.searchsorted(cum, w, side="left"), len(cum) - 1)
        out = law.values[idx]
    elif law.quantile is not None:
        out = np.asarray(law.quantile(w), dtype=float)
    else:
        lo = np.full(w.shape, law.lower)
        hi = np.full(w.shape, law.upper)
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            hit = np.asarray(law.cdf(mid)) >= w
            hi = np.where(hit, mid, hi)
            lo = np.where(hit, lo, mid)
            if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(hi))):
                break
        out = hi
    return float(out) if np.ndim(out) == 0 else out


TWO_POINT = ScalarLaw.discrete([-1.0, 1.0], [0.5, 0.5])


@dataclass(frozen=True, eq=False)
class PerturbationField:
    """Random field with ||field||_{L2} <= 1 attached to member k."""
    field: FeField
    member: int

    @property
    def norm(self) -> float:
        return l2_norm(self.field)


def member_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng((int(seed), int(k)))


def draw_member_perturbation(mesh: Mesh1D, m: int, seed: int, k: int, law: str = "uniform") -> PerturbationField:
    """Nodal i.i.d. draws, rescaled onto the L2 unit sphere when the norm exceeds 1."""
    rng = member_rng(seed, k)
    shape = (mesh.n_interior, m)
    if law == "uniform":
        coeffs = rng.uniform(-1.0, 1.0, size=shape)
    elif law == "gaussian":
        coeffs = rng.standard_normal(shape)
    elif law == "two_point":
        coeffs = inverse_cdf_sample(TWO_POINT, rng.random(shape))
    else:
        raise ConfigurationError(f"Unknown perturbation law '{law}' (known: {', '.join(PERTURBATION_LAWS)})")
    field = FeField(mesh, coeffs)
    norm = l2_norm(field)
    if norm > 1.0:
        field = FeField(mesh, coeffs / norm)
    return PerturbationField(field=field, member=k)


def draw_perturbations(mesh: Mesh1D, M: int, seed: int, law: str = "uniform", m: int = 1) -> list[PerturbationField]:
    if M < 1:
        raise ConfigurationError(f"Ensemble size must be >= 1, got {M}")
    return [draw_member_perturbation(mesh, m, seed, k, law) for k in range(M)]


def perturb_initial(u0h: FeField, perturbation, epsilon: float) -> FeField:
    """u0h + epsilon * perturbation (coefficient-wise)."""
    field = perturbation.field if isinstance(perturbation, PerturbationField) else perturbation
    u0h.check_compatible(field)
    return FeField(u0h.mesh, u0h.coeffs + epsilon * field.coeffs)
