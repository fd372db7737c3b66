"""Rewriting over many-sorted preordered algebras."""

from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
