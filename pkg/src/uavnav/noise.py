"""Gaussian localization noise and perturbed observations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, Observation, SimState, observe_from


@dataclass(frozen=True)
class NoiseSpec:
    """Per-axis measurement noise N(mu, sigma) in meters.

    `stream` names the RNG stream the draws come from (see :mod:`uavnav.rng`).
    """

    mu: float = 0.0
    sigma: float = 0.0
    stream: str = "noise"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def compose(sensor: NoiseSpec, injected: NoiseSpec) -> NoiseSpec:
    """Noise law of sensor noise plus independently injected noise."""
    if sensor.stream != injected.stream:
        raise ValueError("can only compose noise drawn from the same stream family")
    return NoiseSpec(sensor.mu + injected.mu, math.hypot(sensor.sigma, injected.sigma), sensor.stream)


def perturb_position(true_pos, spec: NoiseSpec, rng: np.random.Generator) -> tuple[float, float]:
    # Always draw, even for sigma == 0, so the stream advances identically
    # across noise levels (common random numbers between sweep cells).
    zx, zy = rng.standard_normal(2)
    return (true_pos[0] + spec.mu + spec.sigma * zx,
            true_pos[1] + spec.mu + spec.sigma * zy)


def perturb_observation(state: SimState, spec: NoiseSpec, config: EnvConfig,
                        rng: np.random.Generator) -> tuple[Observation, tuple[float, float]]:
    """Observation measured from a noisy self-position.

    Goal offset and nearest-hazard offset are both taken from the same noisy
    position. Returns the observation and the noisy position.
    """
    noisy = perturb_position(state.pos, spec, rng)
    return observe_from(noisy, state, config), noisy
