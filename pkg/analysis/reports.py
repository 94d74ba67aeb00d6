"""
Report rendering: JSON for machines, aligned text (pandas) for humans,
CSV tables for plotting, and an ok/warning/critical summary.
"""

import logging
from pathlib import Path

import pandas as pd

from stepper.export import write_json

logger = logging.getLogger(__name__)


def new_summary() -> dict:
    return {"ok": [], "warning": [], "critical": []}


def add_verdict(summary: dict, passed: bool, message: str, critical: bool = True) -> None:
    if passed:
        summary["ok"].append(message)
    else:
        summary["critical" if critical else "warning"].append(message)


def render_text(title: str, frame: pd.DataFrame | None = None, fields: dict | None = None) -> str:
    lines = [title, "=" * len(title)]
    if fields:
        width = max(len(k) for k in fields)
        lines += [f"{k.ljust(width)}  {v}" for k, v in fields.items()]
    if frame is not None and not frame.empty:
        lines += ["", frame.to_string(index=False, float_format=lambda v: f"{v:.6e}")]
    return "\n".join(lines) + "\n"


def render_summary(summary: dict) -> str:
    lines = []
    for level in ("critical", "warning", "ok"):
        for msg in summary.get(level, []):
            lines.append(f"[{level.upper():8}] {msg}")
    return "\n".join(lines) + "\n"


def write_report(directory: str | Path, stem: str, payload: dict,
                 frame: pd.DataFrame | None = None, title: str | None = None) -> dict[str, Path]:
    """Write <stem>.json, <stem>.txt and (with a frame) <stem>.csv."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": write_json(out / f"{stem}.json", payload)}
    scalars = {k: v for k, v in payload.items() if isinstance(v, (str, int, float, bool))}
    text = render_text(title or stem, frame, scalars)
    paths["txt"] = out / f"{stem}.txt"
    paths["txt"].write_text(text, encoding="utf-8")
    if frame is not None:
        paths["csv"] = out / f"{stem}.csv"
        frame.to_csv(paths["csv"], index=False)
    logger.debug(f"Report {stem} -> {out}")
    return paths
