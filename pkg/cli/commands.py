"""
Subcommand implementations. Each command validates everything up front,
writes its artifacts through a staging directory and raises
PropertyGateError after committing when a verification gate fails.
"""

import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from analysis.energy import energy_ledger, interpolant_gap
from analysis.residual import weak_residual
from analysis.reports import add_verdict, new_summary, render_summary, write_report
from analysis.studies import mc_variance_study, refinement_study
from cli.artifacts import staged_output, write_manifest
from cli.builder import build_exact, build_setup
from config import RunConfig, get_analysis_config
from ensemble.export import export_measures, histogram_frame, load_ensemble
from ensemble.measures import measure_spread
from ensemble.runner import gradient_consistency
from errors import ConfigurationError, PropertyGateError
from fem.assembly import l2_error
from fem.fields import element_slopes
from nonlinearity.diagnostics import (
    check_growth,
    coercivity_profile,
    estimate_er_norm,
    estimate_lipschitz,
    monotonicity_indicator,
    uncovered_fraction,
)
from nonlinearity.growth import GrowthParams
from nonlinearity.registry import a_eval
from stepper.advisory import ADVISORY_LABEL, check_advisory, max_stable_dt_advisory
from stepper.export import export_trajectory

logger = logging.getLogger(__name__)

BECU_WITNESSES = [
    ([0.035, 0.0, -0.01], [0.05, 0.0, 0.0]),
    ([-0.2, -0.1, 0.2], [-0.1, 0.0, 0.5]),
]


def _gate(summary: dict, what: str) -> None:
    if summary["critical"]:
        raise PropertyGateError(f"{what}: " + "; ".join(summary["critical"]))


def cmd_run(cfg: RunConfig, out_dir: Path, threads: int = 1) -> dict:
    """Single trajectory with energy ledger, interpolant gap, weak residual and error table."""
    setup = build_setup(cfg)
    exact = build_exact(cfg)
    traj = setup.run_trajectory()
    summary = new_summary()

    ledger = energy_ledger(traj)
    add_verdict(summary, ledger.passed,
                f"energy inequality {ledger.verdict} (excess {ledger.max_excess:.3e} <= slack {ledger.slack:.3e})")
    quad, ident = interpolant_gap(traj)
    gap_ok = abs(quad - ident) <= 1e-12 * max(abs(ident), 1e-300) or quad == ident
    add_verdict(summary, gap_ok, f"interpolant gap {quad:.6e} vs {ident:.6e}", critical=False)
    residual = weak_residual(traj)
    add_verdict(summary, residual.passed, f"weak residual max {residual.max_abs:.3e}", critical=False)

    grads = np.stack([element_slopes(traj.mesh, c) for c in traj.coeffs])[..., None]
    frac = uncovered_fraction(setup.nonlinearity, grads)
    if frac > 0:
        summary["warning"].append(f"{frac:.1%} of gradients outside the theory-covered regime")
    lip = estimate_lipschitz(setup.nonlinearity, radius=float(np.abs(grads).max()) * math.sqrt(setup.m) + 1e-12,
                             samples=1_000, shape=(setup.m, 1))
    if not check_advisory(traj.mesh.h, lip, traj.dt):
        summary["warning"].append(f"dt above advisory bound {max_stable_dt_advisory(traj.mesh.h, lip):.3g}")

    with staged_output(out_dir) as stage:
        export_trajectory(traj, stage, extra={"warnings": list(cfg.warnings)})
        write_report(stage, "energy", ledger.to_dict(), ledger.to_frame(), title="Energy ledger")
        write_report(stage, "residual", {**residual.to_dict(), "gap_quadrature": quad, "gap_identity": ident},
                     title="Weak residual and interpolant gap")
        if exact is not None:
            rows = [{"step": i, "t": float(t), "l2_error": l2_error(traj.snapshot(i), lambda xs, tt=t: exact(tt, xs))}
                    for i, t in enumerate(traj.times)]
            errors = pd.DataFrame(rows)
            write_report(stage, "errors", {"final_l2_error": float(errors["l2_error"].iloc[-1])}, errors,
                         title="Error against exact solution")
            logger.info(f"Final L2 error {errors['l2_error'].iloc[-1]:.3e}")
        write_manifest(stage, cfg, "run", extra={
            "setup": setup.describe(), "uncovered_fraction": frac,
            "lipschitz_estimate": lip, "advisory_dt": max_stable_dt_advisory(traj.mesh.h, lip),
            "advisory": ADVISORY_LABEL, "summary": summary,
        })
        (stage / "summary.txt").write_text(render_summary(summary), encoding="utf-8")
    _gate(summary, "run")
    return summary


def cmd_ensemble(cfg: RunConfig, out_dir: Path, threads: int = 1) -> dict:
    """Ensemble run with measure export, normalization and gradient-consistency gates."""
    setup = build_setup(cfg)
    result = setup.run_ensemble(n_jobs=threads)
    summary = new_summary()

    tol = float(get_analysis_config()["consistency_tolerance"])
    consistency = gradient_consistency(result)
    scale = max(1.0, float(np.abs(result.measures.gradients).max()))
    add_verdict(summary, consistency <= tol * scale,
                f"gradient consistency {consistency:.3e} (bound {tol * scale:.3e})")
    mass = result.measures.total_mass()
    add_verdict(summary, mass == 1.0, f"measure mass {mass!r} with {result.M} atoms per site")
    residual = weak_residual(result)
    add_verdict(summary, residual.passed, f"ensemble weak residual max {residual.max_abs:.3e}", critical=False)
    for w in result.warnings:
        summary["warning"].append(w)

    with staged_output(out_dir) as stage:
        export_measures(result, stage)
        write_report(stage, "consistency", {
            "gradient_consistency": consistency, "bound": tol * scale, "total_mass": mass,
            "weak_residual_max": residual.max_abs,
            "spread": {str(k): v for k, v in measure_spread(result.measures).items()},
        }, title="Ensemble checks")
        write_manifest(stage, cfg, "ensemble", extra={
            "setup": setup.describe(), "ensemble": result.config.to_dict(), "summary": summary,
        })
        (stage / "summary.txt").write_text(render_summary(summary), encoding="utf-8")
    _gate(summary, "ensemble")
    return summary


def cmd_study(cfg: RunConfig, out_dir: Path, threads: int = 1) -> dict:
    """Refinement study over the configured axes and/or the Monte-Carlo variance study."""
    if not cfg.study.axes and not cfg.study.mc_M:
        raise ConfigurationError("study block needs axes and/or mc.M")
    setup = build_setup(cfg)
    summary = new_summary()
    reports = []
    if cfg.study.axes:
        reports += refinement_study(setup, cfg.study.axes, n_jobs=threads)
    if cfg.study.mc_M:
        reports.append(mc_variance_study(setup, cfg.study.mc_M, replicas=cfg.study.mc_replicas,
                                         moment=cfg.study.mc_moment, n_jobs=threads))
    for rep in reports:
        add_verdict(summary, rep.passed, f"axis {rep.axis}: differences {rep.differences} rates {rep.rates}")

    with staged_output(out_dir) as stage:
        for rep in reports:
            stem = "mc_variance" if rep.axis == "M" and "variance" in rep.observables else f"study_{rep.axis}"
            write_report(stage, stem, rep.to_dict(), rep.to_frame(), title=f"Study along {rep.axis}")
        write_manifest(stage, cfg, "study", extra={"setup": setup.describe(), "summary": summary})
        (stage / "summary.txt").write_text(render_summary(summary), encoding="utf-8")
    _gate(summary, "study")
    return summary


def cmd_check(cfg: RunConfig, out_dir: Path, threads: int = 1) -> dict:
    """Growth sandwich, monotonicity witnesses, E_r estimate, coercivity and Lipschitz probes."""
    setup = build_setup(cfg)
    nl = setup.nonlinearity
    m = setup.m
    chk = cfg.check
    summary = new_summary()
    payload: dict = {"nonlinearity": nl.name, "theory_covered": nl.theory_covered}

    params = nl.params
    if params is None and cfg.problem.growth is not None:
        params = GrowthParams.from_dict(cfg.problem.growth, m=m, n=1)
    if params is not None:
        mask = None
        if chk.branch == "covered":
            mask = lambda A: nl.is_covered(A)
        elif chk.branch == "uncovered":
            mask = lambda A: ~nl.is_covered(A)
        report = check_growth(nl, params, radii=chk.radii, samples=chk.samples, seed=chk.seed, mask=mask)
        payload["growth"] = report.to_dict()
        add_verdict(summary, report.ok, f"growth sandwich: {report.violations}/{report.samples} violations",
                    critical=nl.theory_covered and chk.branch != "uncovered")
    else:
        summary["warning"].append("no growth parameters to check against")

    witnesses = list(chk.witnesses) or (BECU_WITNESSES if nl.name == "becu" else [])
    payload["witnesses"] = []
    for xi, eta in witnesses:
        val = monotonicity_indicator(nl, xi, eta)
        payload["witnesses"].append({"xi": xi, "eta": eta, "value": val})
        summary["ok" if val >= 0 else "warning"].append(f"(a(xi)-a(eta)):(xi-eta) = {val:.6e} at xi={xi}, eta={eta}")

    if chk.er_exponent is not None:
        est = estimate_er_norm(lambda A: a_eval(nl, A), chk.er_exponent, (m, 1), radii=chk.radii,
                               samples_per_radius=max(1, chk.samples // len(chk.radii)), seed=chk.seed)
        payload["er_norm"] = {"r": chk.er_exponent, "estimate": est.estimate, "per_radius": est.per_radius}
        summary["ok"].append(f"E_r estimate (r={chk.er_exponent}) = {est.estimate:.6e}")

    if m == 3:
        mags = np.array([1.0, 10.0, 100.0, 1000.0, 1e4])
        prof = coercivity_profile(nl, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], mags)
        payload["coercivity"] = {"magnitudes": mags.tolist(), "values": prof.tolist()}
    payload["lipschitz"] = {str(r): estimate_lipschitz(nl, r, samples=2_000, seed=chk.seed, shape=(m, 1))
                            for r in (1.0, 10.0)}

    frame = pd.DataFrame(payload["growth"]["per_radius"]) if "growth" in payload else None
    with staged_output(out_dir) as stage:
        write_report(stage, "check", payload, frame, title=f"Structural check: {nl.name}")
        write_manifest(stage, cfg, "check", extra={"summary": summary})
        (stage / "summary.txt").write_text(render_summary(summary), encoding="utf-8")
    _gate(summary, "check")
    return summary


def cmd_export(cfg: RunConfig, out_dir: Path, source: Path, bins: int = 10) -> dict:
    """Histogram binning of stored measure atoms from a previous ensemble run."""
    path = Path(source) / "ensemble.joblib"
    if not path.exists():
        raise ConfigurationError(f"No stored ensemble at {path}; run the ensemble command first")
    if bins < 1:
        raise ConfigurationError(f"bins must be >= 1, got {bins}")
    result = load_ensemble(path)
    frame = histogram_frame(result, bins=bins)
    with staged_output(out_dir) as stage:
        frame.to_csv(stage / "histograms.csv", index=False)
        write_manifest(stage, cfg, "export", extra={"source": str(path), "bins": bins})
    return {"ok": [f"{len(frame)} histogram rows"], "warning": [], "critical": []}
