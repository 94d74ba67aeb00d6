"""
Banded matrix storage in the LAPACK/scipy `solve_banded` layout.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from errors import NumericalError


@dataclass(frozen=True, eq=False)
class BandedMatrix:
    """Square matrix with `lower` sub- and `upper` super-diagonals.

    ab[upper + i - j, j] == A[i, j] for max(0, j - upper) <= i <= min(n - 1, j + lower).
    """
    ab: np.ndarray
    lower: int
    upper: int

    def __post_init__(self):
        ab = np.array(self.ab, dtype=float)
        if ab.shape[0] != self.lower + self.upper + 1:
            raise ValueError(f"Band storage has {ab.shape[0]} rows, expected {self.lower + self.upper + 1}")
        ab.setflags(write=False)
        object.__setattr__(self, "ab", ab)

    @classmethod
    def tridiagonal(cls, sub: np.ndarray, diag: np.ndarray, sup: np.ndarray) -> "BandedMatrix":
        """From sub-diagonal A[i+1, i], diagonal and super-diagonal A[i, i+1]."""
        n = len(diag)
        ab = np.zeros((3, n))
        ab[0, 1:] = sup
        ab[1, :] = diag
        ab[2, :-1] = sub
        return cls(ab, 1, 1)

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    def diagonal(self, offset: int = 0) -> np.ndarray:
        """Diagonal A[i, i + offset]."""
        row = self.upper - offset
        if offset >= 0:
            return self.ab[row, offset:].copy()
        return self.ab[row, :self.n + offset].copy()

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for offset in range(-self.lower, self.upper + 1):
            d = self.diagonal(offset)
            if len(d):
                A += np.diag(d, k=offset)
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """A @ x for x of shape (n,) or (n, k)."""
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x)
        for offset in range(-self.lower, self.upper + 1):
            d = self.diagonal(offset)
            if not len(d):
                continue
            if x.ndim == 2:
                d = d[:, None]
            if offset >= 0:
                y[:self.n - offset] += d * x[offset:]
            else:
                y[-offset:] += d * x[:self.n + offset]
        return y

    def combine(self, alpha: float, other: "BandedMatrix", beta: float = 1.0) -> "BandedMatrix":
        """alpha * self + beta * other (bands widened to the larger of the two)."""
        lower = max(self.lower, other.lower)
        upper = max(self.upper, other.upper)
        ab = np.zeros((lower + upper + 1, self.n))
        ab[upper - self.upper:upper + self.lower + 1] += alpha * self.ab
        ab[upper - other.upper:upper + other.lower + 1] += beta * other.ab
        return BandedMatrix(ab, lower, upper)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Direct banded factorization solve; NumericalError on singular systems."""
        try:
            x = scipy.linalg.solve_banded((self.lower, self.upper), self.ab, b, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericalError(f"Banded solve failed (n={self.n}): {e}") from e
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"Banded solve produced non-finite values (n={self.n})")
        return x
