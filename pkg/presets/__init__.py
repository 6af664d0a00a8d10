"""Preset converter designs with their published reference values."""
