"""HTTP service exposing the texturing engine."""

from .app import app

__all__ = ["app"]
