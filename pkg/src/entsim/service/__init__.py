"""HTTP service wrapping the simulation package."""

from .app import create_app

__all__ = ["create_app"]
