"""Desk-scale simulation of a bilateral telepresence link: an operator station
and an avatar robot joined by a simulated network, with impedance-controlled
arms, force feedback, spherical video rendering and a holonomic base."""

__version__ = "0.1.0"

from . import geometry, haptics, kinematics, locomotion, netlink, televis  # noqa: E402
from .config import ConfigError, SessionConfig, default_config, load_config, parse_config  # noqa: E402

__all__ = [
    "ConfigError", "SessionConfig", "default_config", "geometry", "haptics", "kinematics",
    "load_config", "locomotion", "netlink", "parse_config", "televis",
]
