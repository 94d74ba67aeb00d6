"""
Artifact directories: every command writes into a staging directory that
is moved into place only when the command completes.
"""

import logging
import os
import shutil
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

from config import VERSION, RunConfig
from stepper.export import write_json

logger = logging.getLogger(__name__)


@contextmanager
def staged_output(final_dir: str | Path):
    """Yield a staging directory; rename it to final_dir on success, remove it on error."""
    final = Path(final_dir)
    final.parent.mkdir(parents=True, exist_ok=True)
    stage = final.parent / f".{final.name}.staging-{os.getpid()}"
    if stage.exists():
        shutil.rmtree(stage)
    stage.mkdir(parents=True)
    try:
        yield stage
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    if final.exists():
        shutil.rmtree(final)
    stage.rename(final)
    logger.info(f"Artifacts committed -> {final}")


def write_manifest(directory: Path, cfg: RunConfig, command: str, extra: dict | None = None) -> Path:
    """manifest.json: tool version, command, seed, config echo and stamped warnings."""
    payload = {
        "tool": "fbp-solver",
        "version": VERSION,
        "command": command,
        "config_name": cfg.name,
        "seed": cfg.ensemble.seed,
        "config": cfg.raw,
        "warnings": list(cfg.warnings),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        payload.update(extra)
    return write_json(Path(directory) / "manifest.json", payload)
