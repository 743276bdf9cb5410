"""Applications driven by the simulation kernel."""

from .base import EventApp, PulseApp

__all__ = ["EventApp", "PulseApp"]
