"""Experiment presets, file emission and the command-line runner."""

from .presets import PRESET_NAMES, Preset, preset

__all__ = ["PRESET_NAMES", "Preset", "preset"]
