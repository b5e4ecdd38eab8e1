"""Fibonacci renormalization fixed points and the drift of their induced maps."""

from __future__ import annotations

__version__ = "0.1.0"
