"""
Exception hierarchy shared by the solver packages.
The CLI maps these onto process exit codes.
"""

import numpy as np


class SolverError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SolverError, ValueError):
    """Invalid mesh, parameter block or run configuration."""


class NumericalError(SolverError, RuntimeError):
    """A linear solve failed (mass or Jacobian factorization)."""


class NonlinearityEvaluationError(SolverError, ArithmeticError):
    """K(A) came out non-finite for a finite input."""

    def __init__(self, A, value=None):
        self.A = np.array(A, dtype=float, copy=True)
        self.value = value
        super().__init__(f"Non-finite K={value} at A={self.A.tolist()}")

    def __reduce__(self):
        return (self.__class__, (self.A, self.value))


class NonConvergenceError(SolverError, RuntimeError):
    """Nonlinear step failed with Newton and with the fixed-point fallback."""

    def __init__(self, final_residual: float, iterations: int, step: int | None = None,
                 member: int | None = None, method: str = "newton"):
        self.final_residual = final_residual
        self.iterations = iterations
        self.step = step
        self.member = member
        self.method = method
        super().__init__(self._describe())

    def __reduce__(self):
        return (self.__class__, (self.final_residual, self.iterations, self.step, self.member, self.method))

    def _describe(self) -> str:
        where = []
        if self.member is not None:
            where.append(f"member {self.member}")
        if self.step is not None:
            where.append(f"step {self.step}")
        loc = f" at {', '.join(where)}" if where else ""
        return (f"{self.method} did not converge{loc}: "
                f"residual={self.final_residual:.3e} after {self.iterations} iterations")

    def at(self, step: int | None = None, member: int | None = None) -> "NonConvergenceError":
        """Return a copy tagged with step/member location."""
        return NonConvergenceError(
            self.final_residual, self.iterations,
            step=self.step if step is None else step,
            member=self.member if member is None else member,
            method=self.method,
        )


class DomainError(SolverError, ValueError):
    """Argument outside the domain of an operation (time, probability level)."""


class MeshMismatchError(SolverError, ValueError):
    """Fields defined on different meshes were combined."""


class UnknownSiteError(SolverError, KeyError):
    """Requested (time index, element) site was not recorded."""


class DegenerateInputError(SolverError, ValueError):
    """Input makes a ratio or rate undefined (e.g. identical initial data)."""


class PropertyGateError(SolverError, RuntimeError):
    """A verification gate (energy, consistency) failed in a CLI run."""
