"""Closed-loop environment: true state -> noisy position -> denoiser -> observation.

Reward and termination always come from the true state; the policy only sees
the observation recomputed from the (noisy, optionally denoised) position.
"""

from __future__ import annotations

import numpy as np

from . import env, filters
from .env import EnvConfig
from .filters import FilterConfig
from .noise import NoiseSpec, perturb_position


class NoisyNavEnv:
    def __init__(self, config: EnvConfig, noise: NoiseSpec = NoiseSpec(),
                 filter_cfg: FilterConfig = FilterConfig()):
        self.config = config
        self.noise = noise
        self.filter_cfg = filter_cfg
        self.state = None
        self.noise_rng = None
        self.filter_state = None
        self.prev_command = (0.0, 0.0)
        self.noisy_pos = None
        self.est_pos = None

    def reset(self, env_rng: np.random.Generator, noise_rng: np.random.Generator) -> np.ndarray:
        self.state, _ = env.reset(self.config, env_rng)
        self.noise_rng = noise_rng
        self.filter_state = filters.make_state(self.filter_cfg, self.config.dt, self.noise.sigma)
        self.prev_command = (0.0, 0.0)
        return self._measure()

    def _measure(self) -> np.ndarray:
        self.noisy_pos = perturb_position(self.state.pos, self.noise, self.noise_rng)
        self.est_pos, self.filter_state = filters.denoise(
            self.filter_cfg.kind, self.filter_state, self.noisy_pos, self.prev_command, self.config.dt)
        return env.observe_from(self.est_pos, self.state, self.config).as_array()

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        self.state, out = env.step(self.state, action, self.config)
        self.prev_command = out.info["velocity"]
        obs = self._measure()
        return obs, out.reward, out.terminal, out.info
