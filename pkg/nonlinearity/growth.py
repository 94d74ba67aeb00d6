"""
Structural parameters of the diffusion nonlinearity: exponents p_i,
offsets mu_i and the constants c0 <= c1 of the growth sandwich

    c0 * sum_i (mu_i^2 + |A_i|^2)^((p_i - 2)/2) <= K(A) <= c1 * sum_i (...)
"""

from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError


@dataclass(frozen=True)
class GrowthParams:
    """Exponents, offsets and growth constants for an m x n nonlinearity."""
    m: int
    n: int
    p: tuple[float, ...]
    mu: tuple[float, ...]
    c0: float = 1.0
    c1: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if len(self.p) != self.m or len(self.mu) != self.m:
            raise ConfigurationError(
                f"GrowthParams needs {self.m} exponents and offsets, got {len(self.p)} and {len(self.mu)}"
            )
        if self.n < 1 or self.m < 1:
            raise ConfigurationError(f"GrowthParams needs m, n >= 1 (m={self.m}, n={self.n})")

    @classmethod
    def from_dict(cls, raw: dict, m: int, n: int = 1) -> "GrowthParams":
        p = raw.get("p", [2.0] * m)
        mu = raw.get("mu", [0.0] * m)
        if np.isscalar(p):
            p = [p] * m
        if np.isscalar(mu):
            mu = [mu] * m
        return cls(m=m, n=n, p=tuple(p), mu=tuple(mu),
                   c0=float(raw.get("c0", 1.0)), c1=float(raw.get("c1", 1.0)))

    @property
    def p_min(self) -> float:
        return min(self.p)

    @property
    def q(self) -> float:
        return max(self.p)

    @property
    def q_hat(self) -> float:
        return max(self.q, 2.0)

    @property
    def q_hat_conjugate(self) -> float:
        return self.q_hat / (self.q_hat - 1.0)

    @property
    def p_lower_bound(self) -> float:
        """max{1, 2n/(n+2)}."""
        return max(1.0, 2.0 * self.n / (self.n + 2.0))

    def violations(self) -> list[str]:
        """Structural assumptions that fail (empty list when admissible)."""
        issues = []
        lb = self.p_lower_bound
        for i, p_i in enumerate(self.p):
            if not p_i > lb:
                issues.append(f"p_{i + 1}={p_i} must exceed {lb:g}")
            if 1.0 < p_i < 2.0 and self.mu[i] == 0.0:
                issues.append(f"mu_{i + 1} must be nonzero when 1 < p_{i + 1}={p_i} < 2")
        if not self.q - self.p_min < 1.0:
            issues.append(f"q - p = {self.q - self.p_min:g} must be < 1")
        if not (0.0 < self.c0 <= self.c1):
            issues.append(f"growth constants need 0 < c0 <= c1 (c0={self.c0}, c1={self.c1})")
        return issues

    def validate(self) -> "GrowthParams":
        issues = self.violations()
        if issues:
            raise ConfigurationError("Invalid growth parameters: " + "; ".join(issues))
        return self

    def bound_sum(self, A: np.ndarray) -> np.ndarray:
        """sum_i (mu_i^2 + |A_i|^2)^((p_i - 2)/2) for A of shape (..., m, n)."""
        A = np.asarray(A, dtype=float)
        rows_sq = np.sum(A ** 2, axis=-1)
        mu = np.asarray(self.mu)
        expo = (np.asarray(self.p) - 2.0) / 2.0
        with np.errstate(divide="ignore"):
            terms = (mu ** 2 + rows_sq) ** expo
        return terms.sum(axis=-1)


def example2_growth_params() -> GrowthParams:
    """Exponents matching K = sqrt(A1^2 + A2^2 + |A3|).

    With mu = 0 the sandwich sum is |A1| + |A2| + |A3|^(1/2); Cauchy-Schwarz
    gives the constants c0 = 1/sqrt(3), c1 = 1.
    """
    return GrowthParams(m=3, n=1, p=(3.0, 3.0, 2.5), mu=(0.0, 0.0, 0.0),
                        c0=1.0 / np.sqrt(3.0), c1=1.0)
