"""Seeded policy evaluation, noise sweeps with a resumable CSV sink, and trajectory replay."""

from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import COLLISION, SUCCESS, TIMEOUT, EnvConfig
from .filters import DenoiserKind, FilterConfig
from .noise import NoiseSpec
from .rng import coord_key, stream
from .sim import NoisyNavEnv

RESULT_COLUMNS = ["mu", "sigma", "denoiser", "episodes", "successes", "collisions", "timeouts",
                  "success_rate", "mean_return", "mean_length"]
SWEEP_KINDS = ("unbiased", "bias_only", "biased_grid")
WORKERS_ENV = "UAVNAV_WORKERS"
_DENOISER_INDEX = {k: i for i, k in enumerate(DenoiserKind)}


class ResultFormatError(ValueError):
    """A result CSV exists but does not follow the expected schema."""


@dataclass(frozen=True)
class CellResult:
    mu: float
    sigma: float
    denoiser: str
    episodes: int
    successes: int
    collisions: int
    timeouts: int
    success_rate: float
    mean_return: float
    mean_length: float

    @property
    def key(self):
        return (fmt_float(self.mu), fmt_float(self.sigma), self.denoiser)

    def as_row(self) -> list[str]:
        return [fmt_float(self.mu), fmt_float(self.sigma), self.denoiser, str(self.episodes),
                str(self.successes), str(self.collisions), str(self.timeouts),
                fmt_float(self.success_rate), fmt_float(self.mean_return), fmt_float(self.mean_length)]


def fmt_float(v: float) -> str:
    return format(float(v), ".9g")


@dataclass
class Trajectory:
    true_pos: list = field(default_factory=list)
    noisy_pos: list = field(default_factory=list)
    est_pos: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    outcome: str = ""
    obstacles: tuple = ()
    goal: tuple = ()

    def __len__(self):
        return len(self.true_pos)


def run_episode(policy, env: NoisyNavEnv, env_rng, noise_rng, policy_rng=None, record: bool = False):
    """Run one episode to termination. Returns (outcome, return, length, trajectory | None)."""
    obs = env.reset(env_rng, noise_rng)
    traj = None
    if record:
        traj = Trajectory(obstacles=env.state.obstacles, goal=env.state.goal)
        traj.true_pos.append(env.state.pos)
        traj.noisy_pos.append(env.noisy_pos)
        traj.est_pos.append(env.est_pos)
        traj.actions.append((math.nan,) * 3)
        traj.rewards.append(0.0)
    total, n = 0.0, 0
    while True:
        action = policy.act(obs[None, :], policy_rng)[0][0]
        obs, r, done, info = env.step(np.clip(action, -1.0, 1.0))
        total += r
        n += 1
        if record:
            traj.true_pos.append(env.state.pos)
            traj.noisy_pos.append(env.noisy_pos)
            traj.est_pos.append(env.est_pos)
            traj.actions.append(tuple(float(a) for a in action))
            traj.rewards.append(r)
        if done:
            if record:
                traj.outcome = info["done_reason"]
            return info["done_reason"], total, n, traj


def _cell_key(noise: NoiseSpec, kind: DenoiserKind) -> tuple[int, int, int]:
    return coord_key(noise.mu), coord_key(noise.sigma), _DENOISER_INDEX[kind]


def evaluate_cell(policy, env_cfg: EnvConfig, noise: NoiseSpec, filter_cfg: FilterConfig,
                  episodes: int, seed: int, deterministic: bool = True) -> CellResult:
    """Evaluate `policy` for `episodes` seeded episodes at one noise level.

    Episode i uses the same arena layout in every cell (env stream keyed by i);
    the noise (and policy sampling, if stochastic) streams are keyed by the
    cell coordinates and i, so results never depend on evaluation order.
    """
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    env = NoisyNavEnv(env_cfg, noise, filter_cfg)
    ck = _cell_key(noise, filter_cfg.kind)
    counts = {SUCCESS: 0, COLLISION: 0, TIMEOUT: 0}
    returns, lengths = [], []
    for i in range(episodes):
        prng = None if deterministic else stream(seed, "policy", *ck, i)
        outcome, ret, n, _ = run_episode(policy, env, stream(seed, "env", i), stream(seed, "noise", *ck, i), prng)
        counts[outcome] += 1
        returns.append(ret)
        lengths.append(n)
    return CellResult(
        mu=noise.mu, sigma=noise.sigma, denoiser=filter_cfg.kind.value, episodes=episodes,
        successes=counts[SUCCESS], collisions=counts[COLLISION], timeouts=counts[TIMEOUT],
        success_rate=counts[SUCCESS] / episodes,
        mean_return=float(np.mean(returns)), mean_length=float(np.mean(lengths)),
    )


def grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive arithmetic grid lo, lo+step, ..., hi (hi snapped to the grid)."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    if hi == lo:
        return [float(lo)]
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(n)]


@dataclass(frozen=True)
class SweepSpec:
    kind: str = "unbiased"
    mu: tuple = (0.0, 0.0, 0.01)      # (min, max, step)
    sigma: tuple = (0.0, 3.0, 0.1)
    denoisers: tuple = ("none",)
    episodes_per_cell: int = 200
    seed: int = 0
    deterministic: bool = True
    checkpoint: str = ""

    def __post_init__(self):
        kind = "biased_grid" if self.kind == "biased" else self.kind
        if kind not in SWEEP_KINDS:
            raise ValueError(f"sweep kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "denoisers", tuple(DenoiserKind(d).value for d in self.denoisers))
        if self.episodes_per_cell <= 0:
            raise ValueError("episodes_per_cell must be positive")
        if not self.denoisers:
            raise ValueError("need at least one denoiser")

    @classmethod
    def preset(cls, kind: str, **kw) -> "SweepSpec":
        """Default grids: sigma 0..3 step 0.1 and/or mu 0..0.3 step 0.01."""
        kind = "biased_grid" if kind == "biased" else kind
        ranges = {
            "unbiased": dict(mu=(0.0, 0.0, 0.01), sigma=(0.0, 3.0, 0.1)),
            "bias_only": dict(mu=(0.0, 0.3, 0.01), sigma=(0.0, 0.0, 0.1)),
            "biased_grid": dict(mu=(0.0, 0.3, 0.01), sigma=(0.0, 3.0, 0.1)),
        }
        if kind not in ranges:
            raise ValueError(f"sweep kind must be one of {SWEEP_KINDS}, got {kind!r}")
        return cls(kind=kind, **{**ranges[kind], **kw})

    def cells(self) -> list[tuple[float, float, str]]:
        return list(itertools.product(grid(*self.mu), grid(*self.sigma), self.denoisers))


def read_results(path) -> list[CellResult]:
    path = Path(path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != RESULT_COLUMNS:
        raise ResultFormatError(f"{path}: malformed result CSV (expected header {','.join(RESULT_COLUMNS)})")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            if len(row) != len(RESULT_COLUMNS):
                raise ValueError(f"{len(row)} fields")
            out.append(CellResult(
                mu=float(row[0]), sigma=float(row[1]), denoiser=DenoiserKind(row[2]).value,
                episodes=int(row[3]), successes=int(row[4]), collisions=int(row[5]), timeouts=int(row[6]),
                success_rate=float(row[7]), mean_return=float(row[8]), mean_length=float(row[9])))
        except ValueError as e:
            raise ResultFormatError(f"{path}:{lineno}: malformed result row ({e})") from None
    return out


def _write_results(path: Path, results) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerow(r.as_row())
    os.replace(tmp, path)


def _eval_task(args):
    policy, env_cfg, mu, sigma, kind, filter_cfg, episodes, seed, deterministic = args
    fcfg = FilterConfig(kind, filter_cfg.lpf_cutoff_rad_s, filter_cfg.kalman_q, filter_cfg.kalman_r,
                        filter_cfg.kalman_p0)
    return evaluate_cell(policy, env_cfg, NoiseSpec(mu, sigma), fcfg, episodes, seed, deterministic)


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def run_sweep(spec: SweepSpec, policy, env_cfg: EnvConfig, out_csv, filter_cfg: FilterConfig = FilterConfig(),
              workers: int | None = None, max_cells: int | None = None, progress=None) -> list[CellResult]:
    """Evaluate every (mu, sigma, denoiser) cell, appending rows to `out_csv` as they finish.

    Cells already present in `out_csv` are skipped, so an interrupted sweep
    resumes where it stopped. `max_cells` bounds how many new cells this call
    evaluates. When every cell is done the file is rewritten in grid order.
    """
    out_csv = Path(out_csv)
    done = {}
    if out_csv.exists() and out_csv.stat().st_size > 0:
        for r in read_results(out_csv):
            done[r.key] = r
    else:
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        _write_results(out_csv, [])

    cells = spec.cells()
    todo = [c for c in cells if (fmt_float(c[0]), fmt_float(c[1]), c[2]) not in done]
    if max_cells is not None:
        todo = todo[:max_cells]
    tasks = [(policy, env_cfg, mu, sigma, kind, filter_cfg, spec.episodes_per_cell, spec.seed, spec.deterministic)
             for mu, sigma, kind in todo]

    workers = workers or default_workers()
    with open(out_csv, "a", newline="") as f:
        sink = csv.writer(f, lineterminator="\n")

        def record(res: CellResult):
            sink.writerow(res.as_row())
            f.flush()
            done[res.key] = res
            if progress is not None:
                progress(len(done), len(cells), res)

        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(workers) as pool:
                for res in pool.map(_eval_task, tasks):
                    record(res)
        else:
            for t in tasks:
                record(_eval_task(t))

    ordered = [done[k] for k in ((fmt_float(m), fmt_float(s), d) for m, s, d in cells) if k in done]
    if len(ordered) == len(cells):
        _write_results(out_csv, ordered)
    return ordered


def replay_episode(policy, env_cfg: EnvConfig, noise: NoiseSpec, filter_cfg: FilterConfig, seed: int,
                   deterministic: bool = True) -> Trajectory:
    """Record true, noisy and denoised positions of one seeded episode."""
    env = NoisyNavEnv(env_cfg, noise, filter_cfg)
    prng = None if deterministic else stream(seed, "policy")
    _, _, _, traj = run_episode(policy, env, stream(seed, "env"), stream(seed, "noise"), prng, record=True)
    return traj


def rmse(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def binomial_se(p1: float, n1: int, p2: float, n2: int) -> float:
    """Standard error of p1 - p2 using the pooled proportion."""
    p = (p1 * n1 + p2 * n2) / (n1 + n2)
    return math.sqrt(max(p * (1 - p), 0.0) * (1 / n1 + 1 / n2))
