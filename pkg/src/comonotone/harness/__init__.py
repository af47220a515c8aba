"""Experiment presets, output writers and the command line interface."""

from .runner import run_preset

__all__ = ["run_preset"]
