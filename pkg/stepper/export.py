"""
Trajectory export: wide CSV of nodal values per step, a JSON manifest with
the scheme and solver statistics, and a joblib dump for later reloading.
"""

import json
import logging
from pathlib import Path

import joblib
import numpy as np
import pandas as pd

from stepper.trajectory import Trajectory

logger = logging.getLogger(__name__)


def json_default(obj):
    """json.dump fallback for numpy scalars and arrays."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def write_json(path: Path, payload: dict) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=json_default)
    return path


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """One row per step: step, t, then u{c}[j] for every node j and component c."""
    nodal = np.zeros((traj.N + 1, traj.mesh.n_interior + 2, traj.m))
    nodal[:, 1:-1, :] = traj.coeffs
    cols = {"step": np.arange(traj.N + 1), "t": traj.times}
    for c in range(traj.m):
        for j in range(nodal.shape[1]):
            cols[f"u{c + 1}[{j}]"] = nodal[:, j, c]
    return pd.DataFrame(cols)


def trajectory_manifest(traj: Trajectory, extra: dict | None = None) -> dict:
    manifest = {
        "nonlinearity": traj.nonlinearity.name if traj.nonlinearity else None,
        "coupling": traj.coupling.B.tolist() if traj.coupling is not None else None,
        "mesh": {"K": traj.mesh.n_elements, "domain": list(traj.mesh.domain), "h": traj.mesh.h,
                 "nodes": traj.mesh.nodes.tolist()},
        "scheme": traj.scheme.to_dict(),
        "solver": traj.solver_summary(),
        "steps": [{"step": i + 1, "iterations": s.iterations, "residual": s.residual, "method": s.method}
                  for i, s in enumerate(traj.stats)],
    }
    if extra:
        manifest.update(extra)
    return manifest


def export_trajectory(traj: Trajectory, directory: str | Path, extra: dict | None = None) -> dict[str, Path]:
    """Write trajectory.csv, trajectory.json and trajectory.joblib into directory."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "trajectory.csv",
        "json": out / "trajectory.json",
        "joblib": out / "trajectory.joblib",
    }
    trajectory_frame(traj).to_csv(paths["csv"], index=False)
    write_json(paths["json"], trajectory_manifest(traj, extra))
    joblib.dump({"nodes": traj.mesh.nodes, "scheme": traj.scheme.to_dict(), "coeffs": traj.coeffs},
                paths["joblib"])
    logger.info(f"Trajectory exported -> {out}")
    return paths
