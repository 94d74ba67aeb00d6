"""
Advisory time-step restriction for the contraction estimate of the scheme.

C(h, L) = L * c_inv^2 / h^2 with the 1D P1 inverse-inequality constant
c_inv^2 = 12; the advisory step keeps C * dt = 1/2. The construction is a
heuristic estimate and is reported as such; the solver never enforces it.
"""

import logging
import math

logger = logging.getLogger(__name__)

INVERSE_CONSTANT_SQ = 12.0
TARGET_PRODUCT = 0.5
ADVISORY_LABEL = "heuristic: C = L * 12 / h^2, dt = 0.5 / C"


def contraction_constant(h: float, lipschitz_estimate: float) -> float:
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    return float(lipschitz_estimate) * INVERSE_CONSTANT_SQ / h ** 2


def max_stable_dt_advisory(h: float, lipschitz_estimate: float) -> float:
    """Largest dt with C(h, L) * dt <= 1/2; math.inf when L = 0 (no restriction)."""
    C = contraction_constant(h, lipschitz_estimate)
    if C <= 0.0:
        return math.inf
    return TARGET_PRODUCT / C


def contraction_factor(h: float, lipschitz_estimate: float, dt: float, N: int) -> float:
    """(1 - C dt)^N; <= 0 signals a step outside the advisory regime."""
    C = contraction_constant(h, lipschitz_estimate)
    base = 1.0 - C * dt
    if base <= 0.0:
        return 0.0 if base == 0.0 else -math.inf
    return base ** N


def check_advisory(h: float, lipschitz_estimate: float, dt: float) -> bool:
    """Log a warning and return False when dt exceeds the advisory step."""
    bound = max_stable_dt_advisory(h, lipschitz_estimate)
    if dt > bound:
        logger.warning(f"dt={dt:.3g} exceeds advisory bound {bound:.3g} ({ADVISORY_LABEL})")
        return False
    return True
