"""
Monte-Carlo variance studies and refinement studies.

Refinement axes are always processed in the order dt -> M -> h -> eps,
each axis varied on its own from the base setup. Replicas and levels run
through joblib; results are collected in submission order.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analysis.setup import ExperimentSetup
from config import get_analysis_config
from ensemble.measures import measure_spread
from ensemble.runner import EnsembleResult
from errors import ConfigurationError, SolverError
from fem.fields import evaluate
from nonlinearity.registry import Nonlinearity, a_eval

logger = logging.getLogger(__name__)

AXIS_ORDER = ("dt", "M", "h", "eps")
# refinement direction per axis: +1 means larger values are finer
_DIRECTION = {"dt": -1, "M": 1, "h": -1, "eps": -1}
DEFAULT_TIME_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


@dataclass
class StudyReport:
    """One study axis: sample points, observables per level, differences and verdict."""
    axis: str
    points: list[float]
    observables: dict[str, list] = field(default_factory=dict)
    differences: list[float] = field(default_factory=list)
    rates: list[float] = field(default_factory=list)
    passed: bool = True
    tolerance: float = 0.0
    notes: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis, "points": self.points, "observables": self.observables,
            "differences": self.differences, "rates": self.rates, "passed": self.passed,
            "tolerance": self.tolerance, "notes": self.notes, "details": self.details,
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per level; differences and rates are attached to the finer level."""
        rows = []
        for l, p in enumerate(self.points):
            row = {"axis": self.axis, "level": l, "point": p}
            for name, vals in self.observables.items():
                v = vals[l]
                if np.ndim(v) == 0:
                    row[name] = float(v)
            row["difference"] = self.differences[l - 1] if 0 < l <= len(self.differences) else np.nan
            row["rate"] = self.rates[l - 2] if 1 < l <= len(self.rates) + 1 else np.nan
            rows.append(row)
        return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Monte-Carlo variance
# ---------------------------------------------------------------------------

def _moment_xi(grads: np.ndarray) -> np.ndarray:
    return grads


def _moment_one(grads: np.ndarray) -> np.ndarray:
    return np.ones(grads.shape[0])


def _moment_a(nl: Nonlinearity, grads: np.ndarray) -> np.ndarray:
    return a_eval(nl, grads)


def resolve_moment(name: str, nl: Nonlinearity):
    if name == "xi":
        return _moment_xi
    if name == "one":
        return _moment_one
    if name == "a":
        return partial(_moment_a, nl)
    raise ConfigurationError(f"Unknown moment '{name}' (known: xi, one, a)")


def spatial_weight(mesh) -> np.ndarray:
    """w(x) = (x - x0) / |Omega| at element midpoints."""
    x0, _ = mesh.domain
    return (mesh.midpoints - x0) / mesh.measure


def integrated_moment(result: EnsembleResult, name: str) -> float:
    """sum_i dt sum_e |e| w(mid_e) sum_entries <nu_{i,e}, g> over steps 1..N."""
    vals = np.asarray(result.step_moments[name])[1:]
    vals = vals.reshape(vals.shape[0], vals.shape[1], -1).sum(axis=2)
    w = result.mesh.lengths * spatial_weight(result.mesh)
    return float(result.scheme.dt * np.sum(vals @ w))


def _replica_observable(setup: ExperimentSetup, M: int, seed: int, moment: str) -> float:
    level = replace(setup, M=int(M), seed=int(seed))
    g = resolve_moment(moment, setup.nonlinearity)
    result = level.run_ensemble(moments={moment: g})
    return integrated_moment(result, moment)


def replica_seeds(base_seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(int(base_seed)).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def mc_variance_study(setup: ExperimentSetup, M_list: Sequence[int], replicas: int = 16,
                      moment: str = "xi", base_seed: int | None = None, n_jobs: int = 1,
                      slope_band: Sequence[float] | None = None) -> StudyReport:
    """Sample variance over independent replicas of the integrated moment, per M.

    The fitted log-log slope of variance against M should sit near -1.
    """
    M_list = [int(m) for m in M_list]
    if len(M_list) < 2 or any(b <= a for a, b in zip(M_list, M_list[1:])):
        raise ConfigurationError(f"M list must be strictly increasing with >= 2 entries, got {M_list}")
    if replicas < 8:
        raise ConfigurationError(f"Need at least 8 replicas, got {replicas}")
    band = list(slope_band or get_analysis_config()["variance_slope_band"])
    base = setup.seed if base_seed is None else base_seed
    seeds = replica_seeds(base, len(M_list) * replicas)

    jobs = [(M, seeds[l * replicas + r]) for l, M in enumerate(M_list) for r in range(replicas)]
    logger.info(f"MC variance study: M={M_list}, R={replicas}, moment={moment}, {len(jobs)} ensembles")
    values = list(Parallel(n_jobs=n_jobs, return_as="generator")(
        delayed(_replica_observable)(setup, M, seed, moment) for M, seed in jobs
    ))

    variances, means = [], []
    for l in range(len(M_list)):
        v = np.asarray(values[l * replicas:(l + 1) * replicas])
        # shift by the first replica so identical replicas give exactly zero
        variances.append(float(np.var(v - v[0], ddof=1)))
        means.append(float(np.mean(v)))

    report = StudyReport(axis="M", points=[float(m) for m in M_list],
                         observables={"variance": variances, "mean": means},
                         details={"replicas": replicas, "moment": moment, "slope_band": band,
                                  "weight": "w(x) = (x - x0) / |Omega|"})
    positive = [(m, v) for m, v in zip(M_list, variances) if v > 0.0]
    if len(positive) < len(M_list):
        report.notes.append("zero variance at some levels (deterministic ensemble)")
        report.passed = all(v == 0.0 for v in variances)
        report.rates = [float("nan")]
    else:
        slope = float(np.polyfit(np.log([m for m, _ in positive]), np.log([v for _, v in positive]), 1)[0])
        report.rates = [slope]
        report.passed = band[0] <= slope <= band[1]
    log = logger.info if report.passed else logger.warning
    log(f"MC variance: {dict(zip(M_list, variances))}, slope={report.rates[0]:.3f}")
    return report


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------

def default_probes(domain: tuple[float, float]) -> np.ndarray:
    a, b = domain
    return a + (b - a) * np.array([0.25, 0.5, 0.75])


def level_observables(setup: ExperimentSetup, probes: np.ndarray,
                      fractions: Sequence[float] = DEFAULT_TIME_FRACTIONS) -> dict:
    """Mean field at probes and time fractions, <nu, a> against sin, final atom spread."""
    result = setup.run_ensemble()
    mesh = result.mesh
    U = np.stack([evaluate(result.mean_at(f * setup.T), probes) for f in fractions])
    x0, _ = mesh.domain
    psi = np.sin(np.pi * (mesh.nodes - x0) / mesh.measure)
    dpsi = np.diff(psi)
    flux = setup.dt * np.einsum("iem,e->m", result.flux_moments[1:], dpsi)
    spread = measure_spread(result.measures)
    return {"probes": U.ravel(), "flux": flux, "spread": float(spread[max(spread)])}


def _oriented(axis: str, levels: Sequence[float]) -> list[float]:
    pts = [float(v) for v in levels]
    if len(pts) < 2:
        raise ConfigurationError(f"Axis '{axis}' needs at least 2 levels, got {len(pts)}")
    steps = np.diff(pts)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ConfigurationError(f"Levels on axis '{axis}' must be strictly monotone, got {pts}")
    if np.sign(steps[0]) != _DIRECTION[axis]:
        pts = pts[::-1]
    return pts


def _study_axis(setup: ExperimentSetup, axis: str, levels: list[float], probes: np.ndarray,
                fractions: Sequence[float], tol: float, n_jobs: int) -> StudyReport:
    logger.info(f"Refinement axis {axis}: levels {levels}")
    setups = [setup.with_level(axis, v) for v in levels]
    try:
        obs = list(Parallel(n_jobs=n_jobs, return_as="generator")(
            delayed(level_observables)(s, probes, fractions) for s in setups
        ))
    except SolverError as e:
        logger.error(f"Refinement axis {axis} failed: {e}")
        raise

    vec = [np.concatenate([o["probes"], o["flux"]]) for o in obs]
    diffs = [float(np.max(np.abs(vec[l + 1] - vec[l]))) for l in range(len(vec) - 1)]
    spreads = [o["spread"] for o in obs]

    rates = []
    for l in range(len(diffs) - 1):
        factor = levels[l + 1] / levels[l + 2] if _DIRECTION[axis] < 0 else levels[l + 2] / levels[l + 1]
        if diffs[l] > 0 and diffs[l + 1] > 0 and factor != 1.0:
            rates.append(float(np.log(diffs[l] / diffs[l + 1]) / np.log(factor)))
        else:
            rates.append(float("nan"))

    report = StudyReport(axis=axis, points=levels, tolerance=tol,
                         observables={"probes": [o["probes"].tolist() for o in obs],
                                      "flux": [o["flux"].tolist() for o in obs],
                                      "spread": spreads},
                         differences=diffs, rates=rates)
    if axis == "eps":
        seq = spreads
        report.details["spread_over_eps"] = [s / e if e > 0 else float("nan") for s, e in zip(spreads, levels)]
    else:
        seq = diffs
        report.details["difference_ratios"] = [
            diffs[l] / diffs[l + 1] if diffs[l + 1] > 0 else float("inf") for l in range(len(diffs) - 1)
        ]
    report.passed = all(b < (1.0 + tol) * a or (a == 0.0 and b == 0.0) for a, b in zip(seq, seq[1:]))
    if len(seq) < 2:
        report.notes.append("single comparison, monotone decrease not testable")
    log = logger.info if report.passed else logger.warning
    log(f"Axis {axis}: differences {['%.3e' % d for d in diffs]} passed={report.passed}")
    return report


def refinement_study(setup: ExperimentSetup, axes: dict[str, Sequence[float]],
                     probes: Sequence[float] | None = None,
                     fractions: Sequence[float] = DEFAULT_TIME_FRACTIONS,
                     tolerance: float | None = None, n_jobs: int = 1) -> list[StudyReport]:
    """Cauchy-difference study along each requested axis, in the order dt, M, h, eps."""
    unknown = set(axes) - set(AXIS_ORDER)
    if unknown:
        raise ConfigurationError(f"Unknown refinement axes {sorted(unknown)} (known: {', '.join(AXIS_ORDER)})")
    if not axes:
        raise ConfigurationError("Refinement study needs at least one axis")
    oriented = {axis: _oriented(axis, axes[axis]) for axis in AXIS_ORDER if axis in axes}
    tol = float(get_analysis_config()["study_tolerance"] if tolerance is None else tolerance)
    probe_pts = np.asarray(probes if probes is not None else default_probes(setup.domain), dtype=float)
    return [_study_axis(setup, axis, levels, probe_pts, fractions, tol, n_jobs)
            for axis, levels in oriented.items()]
