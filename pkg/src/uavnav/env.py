"""Planar waypoint-navigation environment.

A point-mass UAV flies at constant altitude from the left edge of a
rectangular arena to a fixed goal on the right edge, between randomly placed
disc obstacles. The velocity command is integrated directly (first-order
model). Everything here works on the *true* position; measurement noise is
applied elsewhere and never reaches the reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

RUNNING, SUCCESS, COLLISION, TIMEOUT = "running", "success", "collision", "timeout"


class ObstaclePlacementError(RuntimeError):
    """Raised when rejection sampling cannot place an obstacle (config too dense)."""


@dataclass(frozen=True)
class RewardParams:
    r_success: float = 1000.0
    r_fail: float = -1000.0
    r_dist_coeff: float = 4.0
    r_major_penalty: float = 5.0
    r_minor_penalty: float = 1.0

    def __post_init__(self):
        if not (self.r_success > 0 and self.r_fail < 0 and self.r_dist_coeff > 0):
            raise ValueError("need r_success > 0, r_fail < 0, r_dist_coeff > 0")
        if not (self.r_major_penalty > 0 and self.r_minor_penalty > 0):
            raise ValueError("breach penalties must be positive")


@dataclass(frozen=True)
class EnvConfig:
    x_min: float = 0.0
    x_max: float = 5.0
    y_min: float = -2.0
    y_max: float = 2.0
    z_min: float = 0.0
    z_max: float = 1.0
    r_minor: float = 0.2
    r_major: float = 0.1
    eps_success: float = 0.1
    eps_safe: float = 0.2
    obstacle_count_min: int = 1
    obstacle_count_max: int = 3
    obstacle_radius: float = 0.15
    # None -> (y_max - y_min) / 6
    obstacle_y_sigma: float | None = None
    v_max: float = 0.5
    dt: float = 0.05
    max_steps: int = 400
    reward: RewardParams = field(default_factory=RewardParams)

    def __post_init__(self):
        if self.obstacle_y_sigma is None:
            object.__setattr__(self, "obstacle_y_sigma", (self.y_max - self.y_min) / 6.0)
        if not (self.x_min < self.x_max and self.y_min < self.y_max and self.z_min < self.z_max):
            raise ValueError("arena bounds must satisfy min < max on every axis")
        if not 0 < self.r_major < self.r_minor:
            raise ValueError("need 0 < r_major < r_minor")
        if not 0 <= self.obstacle_count_min <= self.obstacle_count_max:
            raise ValueError("need 0 <= obstacle_count_min <= obstacle_count_max")
        if self.eps_success <= 0 or self.v_max <= 0 or self.dt <= 0 or self.max_steps <= 0:
            raise ValueError("eps_success, v_max, dt and max_steps must be positive")
        if self.obstacle_radius <= 0 or self.obstacle_y_sigma < 0:
            raise ValueError("obstacle_radius must be positive and obstacle_y_sigma non-negative")

    @property
    def altitude(self) -> float:
        return 0.5 * (self.z_min + self.z_max)

    @property
    def goal(self) -> tuple[float, float]:
        return (self.x_max - self.r_minor, 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class SimState:
    pos: tuple[float, float]
    goal: tuple[float, float]
    obstacles: tuple[tuple[float, float, float], ...]
    step: int = 0
    done_reason: str = RUNNING


class Observation(NamedTuple):
    dx_goal: float
    dy_goal: float
    dx_obs: float
    dy_obs: float

    def as_array(self, dtype=np.float32) -> np.ndarray:
        return np.array(self, dtype=dtype)


class Hazard(NamedTuple):
    """Nearest hazard seen from a point: surface distance and offset to the closest point."""

    distance: float
    dx: float
    dy: float
    index: int  # obstacle index, or len(obstacles) + wall index (left, right, bottom, top)


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: float
    terminal: bool
    breach_major: bool
    breach_minor: bool
    info: dict


def reset(config: EnvConfig, rng: np.random.Generator, max_tries: int = 1000) -> tuple[SimState, Observation]:
    """Spawn a new episode: start on the left edge, goal on the right, random obstacles."""
    c = config
    y0 = rng.uniform(c.y_min + c.r_minor, c.y_max - c.r_minor)
    start = (c.x_min + c.r_minor, float(y0))
    goal = c.goal
    n = int(rng.integers(c.obstacle_count_min, c.obstacle_count_max + 1))
    keep_out = c.r_minor + c.obstacle_radius
    x_lo, x_hi = c.x_min + c.r_minor, c.x_max - c.r_minor
    y_lo, y_hi = c.y_min + c.obstacle_radius, c.y_max - c.obstacle_radius
    y_mid = 0.5 * (c.y_min + c.y_max)

    obstacles = []
    for _ in range(n):
        for _ in range(max_tries):
            ox = float(rng.uniform(x_lo, x_hi))
            oy = float(min(max(rng.normal(y_mid, c.obstacle_y_sigma), y_lo), y_hi))
            if (math.hypot(ox - start[0], oy - start[1]) > keep_out
                    and math.hypot(ox - goal[0], oy - goal[1]) > keep_out):
                obstacles.append((ox, oy, c.obstacle_radius))
                break
        else:
            raise ObstaclePlacementError(
                f"could not place obstacle {len(obstacles) + 1}/{n} in {max_tries} tries")

    state = SimState(pos=start, goal=goal, obstacles=tuple(obstacles))
    return state, observe(state, config)


def nearest_hazard(pos, obstacles, config: EnvConfig) -> Hazard:
    """Closest obstacle surface or arena wall from `pos`.

    Ties go to the lowest index, obstacles before walls. Obstacle distances are
    signed (negative inside the disc).
    """
    x, y = pos
    best = None
    for i, (cx, cy, r) in enumerate(obstacles):
        ox, oy = x - cx, y - cy
        d_center = math.hypot(ox, oy)
        if d_center > 0.0:
            ux, uy = ox / d_center, oy / d_center
        else:
            ux, uy = -1.0, 0.0
        dist = d_center - r
        if best is None or dist < best.distance:
            best = Hazard(dist, cx + r * ux - x, cy + r * uy - y, i)
    n = len(obstacles)
    walls = (
        (abs(x - config.x_min), config.x_min - x, 0.0),
        (abs(config.x_max - x), config.x_max - x, 0.0),
        (abs(y - config.y_min), 0.0, config.y_min - y),
        (abs(config.y_max - y), 0.0, config.y_max - y),
    )
    for j, (dist, dx, dy) in enumerate(walls):
        if best is None or dist < best.distance:
            best = Hazard(dist, dx, dy, n + j)
    return best


def observe_from(pos, state: SimState, config: EnvConfig) -> Observation:
    """Observation as it would be measured from `pos` (true or estimated)."""
    hz = nearest_hazard(pos, state.obstacles, config)
    return Observation(state.goal[0] - pos[0], state.goal[1] - pos[1], hz.dx, hz.dy)


def observe(state: SimState, config: EnvConfig) -> Observation:
    return observe_from(state.pos, state, config)


def velocity_command(action, v_max: float) -> tuple[float, float]:
    """Map a raw action (vx, vy, vmag) in [-1, 1]^3 to a velocity in m/s.

    The direction is the unit vector of (vx, vy); the speed maps vmag affinely
    from [-1, 1] onto [0, v_max]. A zero direction gives zero velocity.
    """
    vx, vy, vm = (min(max(float(a), -1.0), 1.0) for a in action)
    norm = math.hypot(vx, vy)
    if norm == 0.0:
        return 0.0, 0.0
    speed = 0.5 * (vm + 1.0) * v_max
    return vx / norm * speed, vy / norm * speed


def reward(state: SimState, breach_major: bool, breach_minor: bool, config: EnvConfig) -> float:
    """Per-step reward for the post-step `state` (always the true position)."""
    rp = config.reward
    if state.done_reason == SUCCESS:
        return rp.r_success
    if state.done_reason in (COLLISION, TIMEOUT):
        return rp.r_fail
    d = math.hypot(state.goal[0] - state.pos[0], state.goal[1] - state.pos[1])
    return -rp.r_dist_coeff * d - rp.r_major_penalty * breach_major - rp.r_minor_penalty * breach_minor


def step(state: SimState, action, config: EnvConfig) -> tuple[SimState, StepOutcome]:
    if state.done_reason != RUNNING:
        raise ValueError(f"episode already finished ({state.done_reason}); call reset()")
    c = config
    vx, vy = velocity_command(action, c.v_max)
    x = min(max(state.pos[0] + vx * c.dt, c.x_min), c.x_max)
    y = min(max(state.pos[1] + vy * c.dt, c.y_min), c.y_max)
    pos = (x, y)
    n_step = state.step + 1

    d_goal = math.hypot(state.goal[0] - x, state.goal[1] - y)
    hz = nearest_hazard(pos, state.obstacles, c)
    d_obstacle = min(
        (math.hypot(x - ox, y - oy) - r for ox, oy, r in state.obstacles), default=math.inf)

    if d_goal < c.eps_success:
        reason = SUCCESS
    elif d_obstacle <= 0.0:
        reason = COLLISION
    elif n_step >= c.max_steps:
        reason = TIMEOUT
    else:
        reason = RUNNING

    nxt = replace(state, pos=pos, step=n_step, done_reason=reason)
    breach_minor = hz.distance < c.r_minor
    breach_major = hz.distance < c.r_major
    obs = Observation(state.goal[0] - x, state.goal[1] - y, hz.dx, hz.dy)
    out = StepOutcome(
        observation=obs,
        reward=reward(nxt, breach_major, breach_minor, c),
        terminal=reason != RUNNING,
        breach_major=breach_major,
        breach_minor=breach_minor,
        info={
            "true_pos": pos,
            "dist_to_goal": d_goal,
            "dist_to_nearest_obstacle": d_obstacle,
            "unsafe": d_obstacle <= c.eps_safe,
            "done_reason": reason,
            "velocity": (vx, vy),
        },
    )
    return nxt, out
