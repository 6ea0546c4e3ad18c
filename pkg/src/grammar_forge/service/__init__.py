"""Local HTTP service exposing the workbench session protocol."""

from .app import create_app

__all__ = ["create_app"]
