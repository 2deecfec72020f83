"""Statler: language-model agents with an explicit, externally held world state."""

from __future__ import annotations

__version__ = "0.1.0"
