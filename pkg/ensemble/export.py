"""
Measure export: atoms as JSON, moment tables as CSV, a manifest, and a
joblib dump of the full result for export-time histogram binning.
"""

import logging
from pathlib import Path

import joblib
import numpy as np
import pandas as pd

from ensemble.measures import measure_spread
from ensemble.runner import EnsembleResult
from fem.fields import element_slopes
from stepper.export import write_json

logger = logging.getLogger(__name__)


def measures_payload(result: EnsembleResult) -> dict:
    meas = result.measures
    sites = []
    for row, step in enumerate(meas.record_steps):
        for e in range(meas.mesh.n_elements):
            sites.append({
                "site": [step, e],
                "atoms": meas.gradients[row, :, e].tolist(),
                "weight": 1.0 / meas.M,
            })
    return {"M": meas.M, "record_steps": list(meas.record_steps), "sites": sites}


def moments_frame(result: EnsembleResult) -> pd.DataFrame:
    """Long table: step, element, moment, component, value (every step, every element)."""
    frames = []
    series = {"xi": _mean_slopes(result), "a": result.flux_moments, **result.step_moments}
    for name, arr in series.items():
        arr = np.asarray(arr)
        flat = arr.reshape(arr.shape[0], arr.shape[1], -1)
        steps, elems, comps = np.meshgrid(np.arange(flat.shape[0]), np.arange(flat.shape[1]),
                                          np.arange(flat.shape[2]), indexing="ij")
        frames.append(pd.DataFrame({
            "step": steps.ravel(), "element": elems.ravel(), "moment": name,
            "component": comps.ravel(), "value": flat.ravel(),
        }))
    return pd.concat(frames, ignore_index=True)


def _mean_slopes(result: EnsembleResult) -> np.ndarray:
    return np.stack([element_slopes(result.mesh, c) for c in result.mean_coeffs])


def ensemble_manifest(result: EnsembleResult, extra: dict | None = None) -> dict:
    manifest = {
        "ensemble": result.config.to_dict(),
        "record_steps": list(result.record_steps),
        "scheme": result.scheme.to_dict(),
        "mesh": {"K": result.mesh.n_elements, "domain": list(result.mesh.domain)},
        "nonlinearity": result.nonlinearity.name if result.nonlinearity else None,
        "uncovered_fraction": result.uncovered_fraction,
        "spread": {str(k): v for k, v in measure_spread(result.measures).items()},
        "members": result.member_stats,
        "warnings": result.warnings,
    }
    if extra:
        manifest.update(extra)
    return manifest


def histogram_frame(result: EnsembleResult, bins: int = 10) -> pd.DataFrame:
    """Per recorded site and component, counts of atoms in `bins` equal-width bins."""
    meas = result.measures
    rows = []
    for row, step in enumerate(meas.record_steps):
        for e in range(meas.mesh.n_elements):
            for c in range(meas.gradients.shape[3]):
                atoms = meas.gradients[row, :, e, c, 0]
                counts, edges = np.histogram(atoms, bins=bins)
                for b in range(bins):
                    rows.append((step, e, c, edges[b], edges[b + 1], int(counts[b])))
    return pd.DataFrame(rows, columns=["step", "element", "component", "bin_left", "bin_right", "count"])


def export_measures(result: EnsembleResult, directory: str | Path, extra: dict | None = None) -> dict[str, Path]:
    """Write measures.json, moments.csv, mean_field.csv, ensemble.json and ensemble.joblib."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "measures": out / "measures.json",
        "moments": out / "moments.csv",
        "mean_field": out / "mean_field.csv",
        "manifest": out / "ensemble.json",
        "joblib": out / "ensemble.joblib",
    }
    write_json(paths["measures"], measures_payload(result))
    moments_frame(result).to_csv(paths["moments"], index=False)
    mean = result.mean_coeffs
    cols = {"step": np.arange(mean.shape[0]), "t": result.scheme.times}
    for c in range(mean.shape[2]):
        cols.update({f"U{c + 1}[{j + 1}]": mean[:, j, c] for j in range(mean.shape[1])})
    pd.DataFrame(cols).to_csv(paths["mean_field"], index=False)
    write_json(paths["manifest"], ensemble_manifest(result, extra))
    joblib.dump(result, paths["joblib"])
    logger.info(f"Ensemble exported -> {out}")
    return paths


def load_ensemble(path: str | Path) -> EnsembleResult:
    return joblib.load(path)
