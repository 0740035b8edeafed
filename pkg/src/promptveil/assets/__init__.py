"""Editable text assets: instruction presets, attack prompt templates,
and optimizer meta prompts."""

from __future__ import annotations

from importlib import resources


def load(name: str) -> str:
    """Read a bundled asset file by name."""
    return (
        resources.files(__package__).joinpath(name).read_text(encoding="utf-8").strip()
    )
