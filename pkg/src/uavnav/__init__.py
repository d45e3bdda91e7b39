"""Noisy-localization UAV waypoint navigation with PPO, denoisers and noise sweeps."""

__version__ = "0.1.0"
