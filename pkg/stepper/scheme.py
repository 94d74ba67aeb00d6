"""
Scheme parameters for implicit Euler stepping and the zero-order
coupling matrix B.
"""

from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError


@dataclass(frozen=True)
class SchemeConfig:
    """Time grid t_i = i * dt, i = 0..N, plus nonlinear solver settings."""
    dt: float
    N: int
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: float = 0.5
    fallback_fixed_point: bool = True
    max_fixed_point_iters: int = 500
    time_quad_points: int = 4

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.N < 1:
            raise ConfigurationError(f"N must be >= 1, got {self.N}")
        if not self.newton_tol > 0:
            raise ConfigurationError(f"newton_tol must be positive, got {self.newton_tol}")
        if not 0.0 < self.damping < 1.0:
            raise ConfigurationError(f"damping must lie in (0, 1), got {self.damping}")
        if self.max_newton_iters < 1 or self.max_fixed_point_iters < 1:
            raise ConfigurationError("iteration limits must be >= 1")

    @property
    def T(self) -> float:
        return self.N * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.N + 1)

    @classmethod
    def from_horizon(cls, T: float, N: int, **kwargs) -> "SchemeConfig":
        if not T > 0:
            raise ConfigurationError(f"T must be positive, got {T}")
        return cls(dt=T / N, N=N, **kwargs)

    @classmethod
    def from_spec(cls, spec) -> "SchemeConfig":
        """Build from a config.DiscretizationSpec."""
        return cls(dt=spec.dt, N=spec.N, newton_tol=spec.newton_tol,
                   max_newton_iters=spec.max_newton_iters, damping=spec.damping,
                   fallback_fixed_point=spec.fallback_fixed_point,
                   max_fixed_point_iters=spec.max_fixed_point_iters,
                   time_quad_points=spec.time_quad_points)

    def with_dt(self, dt: float) -> "SchemeConfig":
        """Same horizon T at a new step size (N rounded to the nearest integer)."""
        N = max(1, int(round(self.T / dt)))
        return SchemeConfig(dt=self.T / N, N=N, newton_tol=self.newton_tol,
                            max_newton_iters=self.max_newton_iters, damping=self.damping,
                            fallback_fixed_point=self.fallback_fixed_point,
                            max_fixed_point_iters=self.max_fixed_point_iters,
                            time_quad_points=self.time_quad_points)

    def to_dict(self) -> dict:
        return {
            "dt": self.dt, "N": self.N, "T": self.T, "newton_tol": self.newton_tol,
            "max_newton_iters": self.max_newton_iters, "damping": self.damping,
            "fallback_fixed_point": self.fallback_fixed_point,
            "max_fixed_point_iters": self.max_fixed_point_iters,
            "time_quad_points": self.time_quad_points,
        }


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Constant m x m matrix B acting on the state."""
    B: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ConfigurationError(f"Coupling matrix must be square, got shape {B.shape}")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @classmethod
    def zero(cls, m: int) -> "CouplingMatrix":
        return cls(np.zeros((m, m)))

    @classmethod
    def becu_skew(cls) -> "CouplingMatrix":
        """Rotation coupling of the boundary-layer model."""
        return cls(np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.B)

    @property
    def is_skew(self) -> bool:
        return bool(np.array_equal(self.B, -self.B.T))

    def min_quadratic_form(self, samples: int = 1_000, seed: int = 0) -> float:
        """min over sampled unit v of B v . v; >= 0 when B is positive semi-definite.

        The symmetric part decides the sign, so its smallest eigenvalue is
        included alongside the samples.
        """
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((samples, self.m))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        sampled = np.einsum("ki,ij,kj->k", v, self.B, v)
        sym = 0.5 * (self.B + self.B.T)
        return float(min(sampled.min(), np.linalg.eigvalsh(sym).min()))

    def check_positive(self, samples: int = 1_000, seed: int = 0, tol: float = 1e-14) -> bool:
        return self.min_quadratic_form(samples, seed) >= -tol
