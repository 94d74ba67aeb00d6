"""Batch front-end: run configurations, experiment orchestration and artifacts."""

from cli.commands import cmd_check, cmd_ensemble, cmd_export, cmd_run, cmd_study

__all__ = ["cmd_check", "cmd_ensemble", "cmd_export", "cmd_run", "cmd_study"]
