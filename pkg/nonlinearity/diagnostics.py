"""
Sampling-based structural diagnostics for diffusion nonlinearities:
growth sandwich, monotonicity pairings, E_r norm estimates, local
Lipschitz moduli, coercivity along a ray, and coverage of the growth
theory over visited gradients.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from errors import ConfigurationError
from nonlinearity.growth import GrowthParams
from nonlinearity.registry import Nonlinearity, a_eval

logger = logging.getLogger(__name__)

DEFAULT_RADII = (1.0, 10.0, 100.0, 1000.0)
_REL_TOL = 1e-12


def sample_matrices(shape: tuple[int, int], radius: float, count: int,
                    rng: np.random.Generator,
                    mask: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    max_rounds: int = 50) -> np.ndarray:
    """Draw `count` matrices: uniform direction times radius * U(0, 1].

    With a mask only accepted draws are kept (rejection sampling); fewer
    than `count` come back if the acceptance rate is tiny.
    """
    m, n = shape
    kept: list[np.ndarray] = []
    have = 0
    for _ in range(max_rounds):
        need = count - have
        if need <= 0:
            break
        d = rng.standard_normal((need, m, n))
        norms = np.sqrt(np.sum(d ** 2, axis=(-2, -1)))
        norms[norms == 0.0] = 1.0
        r = radius * (1.0 - rng.random(need))
        batch = d / norms[:, None, None] * r[:, None, None]
        if mask is not None:
            batch = batch[np.asarray(mask(batch), dtype=bool)]
        kept.append(batch)
        have += len(batch)
    if not kept:
        return np.empty((0, m, n))
    return np.concatenate(kept)[:count]


@dataclass
class GrowthReport:
    """Outcome of a growth-sandwich check."""
    samples: int
    lower_violations: int
    upper_violations: int
    min_ratio: float
    max_ratio: float
    per_radius: list[dict] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.lower_violations + self.upper_violations

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "violations": self.violations,
            "lower_violations": self.lower_violations,
            "upper_violations": self.upper_violations,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "per_radius": self.per_radius,
        }


def check_growth(nl: Nonlinearity, params: GrowthParams,
                 radii: Sequence[float] = DEFAULT_RADII, samples: int = 10_000,
                 seed: int = 0,
                 mask: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> GrowthReport:
    """Test c0 * S(A) <= K(A) <= c1 * S(A) on sampled A, S the exponent sum.

    Samples are split evenly across the radius schedule. Points with
    S(A) = K(A) = 0 satisfy the sandwich trivially and are left out of the
    ratio extremes.
    """
    rng = np.random.default_rng(seed)
    shape = (params.m, params.n)
    per = max(1, samples // max(1, len(radii)))
    total = lower = upper = 0
    lo, hi = np.inf, -np.inf
    per_radius = []
    for radius in radii:
        A = sample_matrices(shape, float(radius), per, rng, mask=mask)
        if len(A) == 0:
            continue
        K = nl.K(A)
        S = params.bound_sum(A)
        slack = _REL_TOL * np.maximum(np.abs(S), 1.0)
        n_lo = int(np.sum(K < params.c0 * S - slack * params.c0))
        n_hi = int(np.sum(K > params.c1 * S + slack * params.c1))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = K / S
        ratio = ratio[np.isfinite(ratio)]
        r_lo = float(ratio.min()) if ratio.size else float("nan")
        r_hi = float(ratio.max()) if ratio.size else float("nan")
        if ratio.size:
            lo, hi = min(lo, r_lo), max(hi, r_hi)
        total += len(A)
        lower += n_lo
        upper += n_hi
        per_radius.append({"radius": float(radius), "samples": len(A),
                           "violations": n_lo + n_hi, "min_ratio": r_lo, "max_ratio": r_hi})

    report = GrowthReport(samples=total, lower_violations=lower, upper_violations=upper,
                          min_ratio=float(lo) if np.isfinite(lo) else float("nan"),
                          max_ratio=float(hi) if np.isfinite(hi) else float("nan"),
                          per_radius=per_radius)
    if report.ok:
        logger.info(f"Growth check {nl.name}: {total} samples, ratios in [{report.min_ratio:.4g}, {report.max_ratio:.4g}]")
    else:
        logger.warning(f"Growth check {nl.name}: {report.violations}/{total} violations")
    return report


def monotonicity_indicator(nl: Nonlinearity, xi, eta) -> float:
    """(a(xi) - a(eta)) : (xi - eta); negative values witness non-monotonicity."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    if eta.ndim == 1:
        eta = eta[:, None]
    if xi.shape != eta.shape:
        raise ConfigurationError(f"Shape mismatch {xi.shape} vs {eta.shape}")
    return float(np.sum((a_eval(nl, xi) - a_eval(nl, eta)) * (xi - eta)))


@dataclass
class ErNormEstimate:
    estimate: float
    per_radius: list[tuple[float, float]]


def estimate_er_norm(g: Callable[[np.ndarray], np.ndarray], r: float,
                     shape: tuple[int, int], radii: Sequence[float] = DEFAULT_RADII,
                     samples_per_radius: int = 2_500, seed: int = 0) -> ErNormEstimate:
    """Lower estimate of sup_A |g(A)| / (1 + |A|^r) over sampled A.

    `g` maps a batch (..., m, n) to values of shape (...) or (..., m, n);
    the Frobenius norm is taken over trailing matrix axes. The origin is
    always part of the sample set.
    """
    if not r > 0:
        raise ConfigurationError(f"E_r exponent must be positive, got {r}")
    rng = np.random.default_rng(seed)
    best = _er_ratio(g, np.zeros((1,) + tuple(shape)), r).max()
    per_radius = []
    for radius in radii:
        A = sample_matrices(shape, float(radius), samples_per_radius, rng)
        val = float(_er_ratio(g, A, r).max())
        best = max(best, val)
        per_radius.append((float(radius), float(best)))
    return ErNormEstimate(estimate=float(best), per_radius=per_radius)


def _er_ratio(g, A: np.ndarray, r: float) -> np.ndarray:
    vals = np.asarray(g(A), dtype=float)
    if vals.ndim == A.ndim:
        mag = np.sqrt(np.sum(vals ** 2, axis=(-2, -1)))
    else:
        mag = np.abs(vals)
    norm_A = np.sqrt(np.sum(A ** 2, axis=(-2, -1)))
    return mag / (1.0 + norm_A ** r)


def estimate_lipschitz(nl: Nonlinearity, radius: float, samples: int = 4_000,
                       seed: int = 0, shape: Optional[tuple[int, int]] = None) -> float:
    """Max |a(xi) - a(eta)| / |xi - eta| over pairs sampled in the ball of `radius`.

    Half of the pairs are independent points of the ball, the other half
    are close pairs with log-uniform separation.
    """
    if shape is None:
        if nl.m is None:
            raise ConfigurationError(f"{nl.name} needs an explicit shape for Lipschitz sampling")
        shape = (nl.m, nl.n)
    radius = max(float(radius), 1e-12)
    rng = np.random.default_rng(seed)
    half = max(1, samples // 2)
    xi = sample_matrices(shape, radius, 2 * half, rng)
    eta_far = xi[half:]
    xi_far = xi[:half]

    xi_near = xi[half:]
    d = rng.standard_normal(xi_near.shape)
    d /= np.maximum(np.sqrt(np.sum(d ** 2, axis=(-2, -1)))[:, None, None], 1e-300)
    sep = radius * 10.0 ** rng.uniform(-6.0, -1.0, size=len(xi_near))
    eta_near = xi_near + d * sep[:, None, None]

    best = 0.0
    for a_pts, b_pts in ((xi_far, eta_far), (xi_near, eta_near)):
        dist = np.sqrt(np.sum((a_pts - b_pts) ** 2, axis=(-2, -1)))
        ok = dist > 0
        if not ok.any():
            continue
        diff = a_eval(nl, a_pts[ok]) - a_eval(nl, b_pts[ok])
        q = np.sqrt(np.sum(diff ** 2, axis=(-2, -1))) / dist[ok]
        best = max(best, float(q.max()))
    logger.debug(f"Lipschitz estimate {nl.name} in ball {radius:.3g}: {best:.4g}")
    return best


def coercivity_profile(nl: Nonlinearity, base, direction, magnitudes) -> np.ndarray:
    """a(xi) : xi / |xi| along xi = base + t * direction for each t in magnitudes."""
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if base.ndim == 1:
        base = base[:, None]
    if direction.ndim == 1:
        direction = direction[:, None]
    t = np.asarray(magnitudes, dtype=float)
    xi = base[None] + t[:, None, None] * direction[None]
    a = a_eval(nl, xi)
    norm = np.sqrt(np.sum(xi ** 2, axis=(-2, -1)))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norm > 0, np.sum(a * xi, axis=(-2, -1)) / norm, 0.0)


def uncovered_fraction(nl: Nonlinearity, gradients) -> float:
    """Share of visited gradients (..., m, n) outside the theory-covered regime."""
    g = np.asarray(gradients, dtype=float)
    covered = nl.is_covered(g)
    if covered.size == 0:
        return 0.0
    return float(1.0 - np.mean(covered))
