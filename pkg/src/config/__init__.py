"""Configuration package for donor-stark."""

from .settings import PathSettings, PhysicsDefaults, RuntimeSettings, Settings, settings

__all__ = [
    "PathSettings",
    "PhysicsDefaults",
    "RuntimeSettings",
    "Settings",
    "settings",
]
