"""PPO with GAE on the noisy navigation environment."""

from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EnvConfig
from .filters import FilterConfig
from .nn import Adam, NonFiniteGradientError
from .noise import NoiseSpec
from .policy import ACT_DIM, OBS_DIM, ActorCritic
from .rng import stream
from .sim import NoisyNavEnv

log = logging.getLogger(__name__)

TRAINLOG_COLUMNS = ["step", "episode", "ep_return", "ep_len", "mean100_return", "mean100_len",
                    "policy_loss", "value_loss", "clip_frac"]


@dataclass(frozen=True)
class PpoConfig:
    total_timesteps: int = 500_000
    rollout_length: int = 2048
    minibatch_size: int = 64
    epochs_per_update: int = 10
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    value_coeff: float = 0.5
    entropy_coeff: float = 0.0
    max_grad_norm: float = 0.5
    n_envs: int = 1
    learning_rate: float = 3e-4
    checkpoint_every: int = 0  # updates between checkpoints; 0 = only at the end

    def __post_init__(self):
        if not 0 < self.gamma <= 1 or not 0 <= self.gae_lambda <= 1:
            raise ValueError("need 0 < gamma <= 1 and 0 <= gae_lambda <= 1")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if (self.rollout_length * self.n_envs) % self.minibatch_size:
            raise ValueError("rollout_length * n_envs must be divisible by minibatch_size")


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @classmethod
    def empty(cls, length: int, n_envs: int) -> "RolloutBuffer":
        shape = (length, n_envs)
        return cls(
            obs=np.zeros(shape + (OBS_DIM,), np.float32),
            actions=np.zeros(shape + (ACT_DIM,), np.float32),
            log_probs=np.zeros(shape, np.float32),
            values=np.zeros(shape, np.float32),
            rewards=np.zeros(shape, np.float32),
            dones=np.zeros(shape, np.float32),
            last_values=np.zeros(n_envs, np.float32),
        )

    def __len__(self):
        return self.rewards.size

    def flat(self):
        n = len(self)
        return (self.obs.reshape(n, OBS_DIM), self.actions.reshape(n, ACT_DIM),
                self.log_probs.reshape(n), self.advantages.reshape(n), self.returns.reshape(n))


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)
    returns: deque = field(default_factory=lambda: deque(maxlen=100))
    lengths: deque = field(default_factory=lambda: deque(maxlen=100))
    updates: list = field(default_factory=list)

    def episode(self, step: int, ep_return: float, ep_len: int, outcome: str = "") -> None:
        self.returns.append(ep_return)
        self.lengths.append(ep_len)
        last = self.updates[-1] if self.updates else {}
        self.rows.append({
            "step": step,
            "episode": len(self.rows) + 1,
            "ep_return": ep_return,
            "ep_len": ep_len,
            "mean100_return": float(np.mean(self.returns)),
            "mean100_len": float(np.mean(self.lengths)),
            "policy_loss": last.get("policy_loss", math.nan),
            "value_loss": last.get("value_loss", math.nan),
            "clip_frac": last.get("clip_frac", math.nan),
            "outcome": outcome,
        })

    def outcome_rate(self, outcome: str, last: int = 100) -> float:
        rows = self.rows[-last:]
        return sum(r["outcome"] == outcome for r in rows) / max(len(rows), 1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(TRAINLOG_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in TRAINLOG_COLUMNS])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


class RolloutCollector:
    """Persistent env instances and per-episode bookkeeping across rollouts."""

    def __init__(self, envs: list[NoisyNavEnv], seed: int):
        self.envs = envs
        self.env_rngs = [stream(seed, "env", i) for i in range(len(envs))]
        self.noise_rngs = [stream(seed, "noise", i) for i in range(len(envs))]
        self.policy_rng = stream(seed, "policy")
        self.obs = np.stack([e.reset(self.env_rngs[i], self.noise_rngs[i]) for i, e in enumerate(envs)])
        self.ep_return = np.zeros(len(envs))
        self.ep_len = np.zeros(len(envs), dtype=int)
        self.steps = 0

    def collect(self, policy: ActorCritic, length: int, log: TrainLog | None = None,
                deterministic: bool = False) -> RolloutBuffer:
        n = len(self.envs)
        buf = RolloutBuffer.empty(length, n)
        rng = None if deterministic else self.policy_rng
        for t in range(length):
            action, logp, value = policy.act(self.obs, rng)
            buf.obs[t] = self.obs
            buf.actions[t] = action
            buf.log_probs[t] = logp
            buf.values[t] = value
            self.steps += n
            for i, e in enumerate(self.envs):
                obs, r, done, info = e.step(np.clip(action[i], -1.0, 1.0))
                buf.rewards[t, i] = r
                buf.dones[t, i] = done
                self.ep_return[i] += r
                self.ep_len[i] += 1
                if done:
                    if log is not None:
                        log.episode(self.steps, float(self.ep_return[i]), int(self.ep_len[i]),
                                    info["done_reason"])
                    self.ep_return[i] = 0.0
                    self.ep_len[i] = 0
                    obs = e.reset(self.env_rngs[i], self.noise_rngs[i])
                self.obs[i] = obs
        buf.last_values[:] = policy.value(self.obs)
        return buf


def collect_rollout(policy: ActorCritic, envs: list[NoisyNavEnv], cfg: PpoConfig, seed: int,
                    deterministic: bool = False) -> RolloutBuffer:
    """One-shot rollout from freshly reset envs (see RolloutCollector for training)."""
    return RolloutCollector(envs, seed).collect(policy, cfg.rollout_length, deterministic=deterministic)


def compute_gae(rewards, values, dones, last_values, gamma: float, lam: float):
    """GAE(lambda) over a (T, n_envs) rollout.

    ``dones[t]`` marks that the episode ended at step t, so nothing is
    bootstrapped across it. The final step bootstraps from ``last_values``
    unless it was terminal. Returns (advantages, returns).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.ndim == 1:
        adv, ret = compute_gae(rewards[:, None], values[:, None], dones[:, None],
                               np.atleast_1d(last_values), gamma, lam)
        return adv[:, 0], ret[:, 0]
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    gae = np.zeros(rewards.shape[1])
    next_value = np.asarray(last_values, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        adv[t] = gae
        next_value = values[t]
    return adv, adv + values


def ppo_loss_and_grads(policy: ActorCritic, obs, actions, old_log_probs, advantages, returns,
                       cfg: PpoConfig, normalize_advantages: bool = True):
    """Clipped-surrogate loss on one minibatch and its gradients w.r.t. ``policy.params``."""
    B = len(obs)
    adv = np.asarray(advantages, dtype=np.float64)
    if normalize_advantages and B > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    mean, a_cache = policy.actor.forward(obs)
    value, c_cache = policy.critic.forward(obs)
    value = value[:, 0]
    log_std = policy.log_std.astype(np.float64)
    inv_var = np.exp(-2.0 * log_std)
    diff = np.asarray(actions, np.float64) - mean
    logp = -0.5 * np.sum(diff * diff * inv_var, axis=1) - np.sum(log_std) - 0.5 * ACT_DIM * math.log(2 * math.pi)

    ratio = np.exp(logp - np.asarray(old_log_probs, np.float64))
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    policy_loss = -np.mean(np.minimum(ratio * adv, clipped * adv))
    value_err = value.astype(np.float64) - np.asarray(returns, np.float64)
    value_loss = np.mean(value_err ** 2)
    entropy = float(np.sum(log_std) + 0.5 * ACT_DIM * (1.0 + math.log(2 * math.pi)))
    loss = policy_loss + cfg.value_coeff * value_loss - cfg.entropy_coeff * entropy

    # samples on the clipped branch are constant in theta
    active = ~(((adv > 0) & (ratio > 1.0 + cfg.clip_eps)) | ((adv < 0) & (ratio < 1.0 - cfg.clip_eps)))
    d_logp = -(adv * ratio * active) / B
    d_mean = d_logp[:, None] * diff * inv_var
    d_log_std = (d_logp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - cfg.entropy_coeff
    d_value = cfg.value_coeff * 2.0 * value_err / B

    grads = (policy.actor.backward(a_cache, d_mean)
             + [d_log_std.astype(policy.log_std.dtype)]
             + policy.critic.backward(c_cache, d_value[:, None]))
    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)),
        "max_ratio_dev": float(np.max(np.abs(ratio - 1.0))),
    }
    return stats, grads


def clip_grad_norm(grads, max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for g in grads:
            g *= scale
    return norm


def ppo_update(policy: ActorCritic, buffer: RolloutBuffer, cfg: PpoConfig, optim: Adam,
               rng: np.random.Generator) -> dict:
    """Epochs of shuffled minibatch updates. Returns averaged diagnostics."""
    obs, actions, old_logp, adv, ret = buffer.flat()
    n = len(buffer)
    history = []
    first = None
    for _ in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            stats, grads = ppo_loss_and_grads(policy, obs[idx], actions[idx], old_logp[idx],
                                              adv[idx], ret[idx], cfg)
            if not math.isfinite(stats["loss"]):
                raise NonFiniteGradientError(f"non-finite PPO loss, diagnostics: {stats}")
            if first is None:
                first = stats
            stats["grad_norm"] = clip_grad_norm(grads, cfg.max_grad_norm)
            optim.step(policy.params, grads)
            history.append(stats)
    out = {k: float(np.mean([h[k] for h in history])) for k in history[0]}
    out["first_minibatch"] = first
    return out


def make_envs(env_cfg: EnvConfig, noise: NoiseSpec, filter_cfg: FilterConfig, n: int) -> list[NoisyNavEnv]:
    return [NoisyNavEnv(env_cfg, noise, filter_cfg) for _ in range(n)]


def train(env_cfg: EnvConfig, noise: NoiseSpec, filter_cfg: FilterConfig, cfg: PpoConfig, seed: int,
          out_dir=None, progress=None) -> tuple[ActorCritic, TrainLog]:
    """Train from scratch. Writes ``policy.ckpt`` and ``trainlog.csv`` into `out_dir` if given."""
    policy = ActorCritic(rng=stream(seed, "init"))
    optim = Adam(lr=cfg.learning_rate)
    shuffle_rng = stream(seed, "shuffle")
    collector = RolloutCollector(make_envs(env_cfg, noise, filter_cfg, cfg.n_envs), seed)
    trainlog = TrainLog()
    n_updates = max(1, cfg.total_timesteps // (cfg.rollout_length * cfg.n_envs))
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    for u in range(n_updates):
        buf = collector.collect(policy, cfg.rollout_length, trainlog)
        buf.advantages, buf.returns = compute_gae(buf.rewards, buf.values, buf.dones, buf.last_values,
                                                  cfg.gamma, cfg.gae_lambda)
        stats = ppo_update(policy, buf, cfg, optim, shuffle_rng)
        stats["update"] = u + 1
        stats["step"] = collector.steps
        trainlog.updates.append(stats)
        if trainlog.returns:
            log.info("update %d/%d step %d mean100_return %.1f mean100_len %.1f", u + 1, n_updates,
                     collector.steps, np.mean(trainlog.returns), np.mean(trainlog.lengths))
        if progress is not None:
            progress(u + 1, n_updates, trainlog)
        if out_dir is not None and cfg.checkpoint_every and (u + 1) % cfg.checkpoint_every == 0:
            policy.save(out_dir / f"policy_{collector.steps}.ckpt")

    if out_dir is not None:
        policy.save(out_dir / "policy.ckpt")
        trainlog.write_csv(out_dir / "trainlog.csv")
    return policy, trainlog
