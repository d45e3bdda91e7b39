"""Causal position denoisers: 2nd-order Bessel low-pass and a Kalman filter.

Both take the noisy position (x, y) once per control step and return a
cleaned estimate. The Kalman filter also uses the previous velocity command.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class DenoiserKind(str, enum.Enum):
    NONE = "none"
    LPF = "lpf"
    KALMAN = "kalman"


@dataclass(frozen=True)
class FilterConfig:
    kind: DenoiserKind = DenoiserKind.NONE
    lpf_cutoff_rad_s: float = 2.0
    kalman_q: float = 0.05
    # None -> sigma**2 of the active noise
    kalman_r: float | None = None
    kalman_p0: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", DenoiserKind(self.kind))


@dataclass(frozen=True)
class BiquadCoeffs:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    @property
    def dc_gain(self) -> float:
        return (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])


def lpf_design(cutoff: float, sample_rate: float) -> BiquadCoeffs:
    """Discretize H(s) = 3 / (s^2 + 3s + 3) scaled to `cutoff` rad/s.

    Bilinear transform, prewarped so the analog cutoff lands exactly at the
    same digital frequency.
    """
    if not 0 < cutoff < math.pi * sample_rate:
        raise ValueError(f"cutoff {cutoff} rad/s must lie in (0, Nyquist={math.pi * sample_rate})")
    # s / wc' = k (z - 1) / (z + 1)
    k = 1.0 / math.tan(cutoff / (2.0 * sample_rate))
    a0 = k * k + 3.0 * k + 3.0
    return BiquadCoeffs(
        b0=3.0 / a0,
        b1=6.0 / a0,
        b2=3.0 / a0,
        a1=(6.0 - 2.0 * k * k) / a0,
        a2=(k * k - 3.0 * k + 3.0) / a0,
    )


@dataclass
class LpfState:
    """Per-axis transposed direct-form-II registers.

    With `warm_start` the registers are set on the first sample so the output
    starts at that sample instead of ramping up from zero.
    """

    coeffs: BiquadCoeffs
    z: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    warm_start: bool = True
    primed: bool = False


def lpf_step(state: LpfState, measurement) -> tuple[tuple[float, float], LpfState]:
    """Filter one (x, y) sample. Updates `state` in place and returns it."""
    c = state.coeffs
    z = state.z
    if state.warm_start and not state.primed:
        for i in range(2):
            u = float(measurement[i])
            z[i, 0] = (1.0 - c.b0) * u
            z[i, 1] = (c.b2 - c.a2) * u
    state.primed = True
    out = [0.0, 0.0]
    for i in range(2):
        u = float(measurement[i])
        y = c.b0 * u + z[i, 0]
        z[i, 0] = c.b1 * u - c.a1 * y + z[i, 1]
        z[i, 1] = c.b2 * u - c.a2 * y
        out[i] = y
    return (out[0], out[1]), state


@dataclass
class KalmanState:
    """Constant-velocity Kalman filter over (x, y, vx, vy) with the command as control."""

    q: float = 0.05
    r: float = 0.01
    x: np.ndarray = field(default_factory=lambda: np.zeros(4))
    P: np.ndarray = field(default_factory=lambda: 0.1 * np.eye(4))
    initialized: bool = False


_H = np.hstack([np.eye(2), np.zeros((2, 2))])


def _process_noise(q: float, dt: float) -> np.ndarray:
    # integrated white acceleration of intensity q, full rank
    a, b, c = dt ** 3 / 3.0, dt ** 2 / 2.0, dt
    return q * np.block([[a * np.eye(2), b * np.eye(2)], [b * np.eye(2), c * np.eye(2)]])


def kalman_predict(state: KalmanState, command, dt: float) -> None:
    # The velocity states are driven to the command; position integrates it.
    F = np.zeros((4, 4))
    F[0, 0] = F[1, 1] = 1.0
    u = np.asarray(command, dtype=float)
    state.x = np.concatenate([state.x[:2] + u * dt, u])
    state.P = F @ state.P @ F.T + _process_noise(state.q, dt)


def kalman_update(state: KalmanState, measurement) -> None:
    z = np.asarray(measurement, dtype=float)
    R = state.r * np.eye(2)
    S = _H @ state.P @ _H.T + R
    K = np.linalg.solve(S, _H @ state.P).T
    state.x = state.x + K @ (z - _H @ state.x)
    IKH = np.eye(4) - K @ _H
    P = IKH @ state.P @ IKH.T + K @ R @ K.T  # Joseph form
    state.P = 0.5 * (P + P.T)


def kalman_step(state: KalmanState, measurement, prev_command, dt: float) -> tuple[tuple[float, float], KalmanState]:
    """Predict with the previous velocity command, correct with the measurement.

    The first call only initializes the estimate at the measurement.
    """
    if not np.all(np.isfinite(measurement)):
        raise ValueError(f"non-finite measurement {measurement!r}")
    if not state.initialized:
        state.x = np.array([measurement[0], measurement[1], 0.0, 0.0], dtype=float)
        state.initialized = True
        return (float(measurement[0]), float(measurement[1])), state
    kalman_predict(state, prev_command, dt)
    kalman_update(state, measurement)
    return (float(state.x[0]), float(state.x[1])), state


def make_state(cfg: FilterConfig, dt: float, noise_sigma: float | None = None):
    """Fresh per-episode filter state for `cfg.kind` (None for no denoiser)."""
    if cfg.kind == DenoiserKind.NONE:
        return None
    if cfg.kind == DenoiserKind.LPF:
        return LpfState(lpf_design(cfg.lpf_cutoff_rad_s, 1.0 / dt))
    if cfg.kalman_r is not None:
        r = cfg.kalman_r
    elif noise_sigma is not None:
        r = noise_sigma ** 2
    else:
        r = 0.01
    return KalmanState(q=cfg.kalman_q, r=max(r, 1e-6), P=cfg.kalman_p0 * np.eye(4))


def denoise(kind, state, measurement, prev_command, dt: float):
    """Dispatch one denoising step; returns (estimate, state)."""
    kind = DenoiserKind(kind)
    if kind == DenoiserKind.NONE:
        return (float(measurement[0]), float(measurement[1])), state
    if kind == DenoiserKind.LPF:
        if not isinstance(state, LpfState):
            raise TypeError(f"lpf denoiser needs an LpfState, got {type(state).__name__}")
        return lpf_step(state, measurement)
    if not isinstance(state, KalmanState):
        raise TypeError(f"kalman denoiser needs a KalmanState, got {type(state).__name__}")
    return kalman_step(state, measurement, prev_command, dt)
