"""Actor-critic pair and its on-disk checkpoint format.

Checkpoint layout: an ASCII header of ``key = value`` lines opened by the
magic line and closed by ``---``, then every actor parameter followed by every
critic parameter as little-endian float32 (per layer: weight matrix row-major
with shape (fan_in, fan_out), then bias).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .nn import Mlp, gaussian_log_prob, sample

MAGIC = "UAVNAV-CHECKPOINT v1"
OBS_DIM = 4
ACT_DIM = 3


class CheckpointError(ValueError):
    pass


class ActorCritic:
    """Tanh-mean Gaussian actor with a state-independent log-std, plus a value critic."""

    def __init__(self, hidden=(64, 64), rng: np.random.Generator | None = None, dtype=np.float32):
        self.actor = Mlp((OBS_DIM, *hidden, ACT_DIM), "tanh", dtype, rng, output_gain=0.01)
        self.critic = Mlp((OBS_DIM, *hidden, 1), "identity", dtype, rng, output_gain=1.0)
        self.log_std = np.zeros(ACT_DIM, dtype=dtype)

    @property
    def params(self) -> list[np.ndarray]:
        return self.actor.params + [self.log_std] + self.critic.params

    def value(self, obs) -> np.ndarray:
        return self.critic(obs)[:, 0]

    def act(self, obs, rng: np.random.Generator | None = None):
        """Returns (action, log_prob, value) for a batch of observations.

        With ``rng=None`` the mean action is returned (deterministic policy).
        """
        mean = self.actor(obs)
        action = mean if rng is None else sample(mean, self.log_std, rng)
        return action, gaussian_log_prob(mean, self.log_std, action), self.value(obs)

    def copy(self) -> "ActorCritic":
        other = ActorCritic.__new__(ActorCritic)
        other.actor = _copy_mlp(self.actor)
        other.critic = _copy_mlp(self.critic)
        other.log_std = self.log_std.copy()
        return other

    def save(self, path) -> None:
        header = [
            MAGIC,
            f"actor_sizes = {','.join(map(str, self.actor.sizes))}",
            f"critic_sizes = {','.join(map(str, self.critic.sizes))}",
            f"hidden_activation = {self.actor.hidden_activation}",
            f"actor_output = {self.actor.output_activation}",
            f"critic_output = {self.critic.output_activation}",
            f"log_std = {','.join(repr(float(v)) for v in self.log_std.astype(np.float32))}",
            f"n_params = {sum(p.size for p in self.actor.params + self.critic.params)}",
            "---",
        ]
        blob = np.concatenate([p.ravel() for p in self.actor.params + self.critic.params])
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(("\n".join(header) + "\n").encode("ascii"))
            f.write(blob.astype("<f4").tobytes())

    @classmethod
    def load(cls, path, dtype=np.float32) -> "ActorCritic":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        data = path.read_bytes()
        sep = b"\n---\n"
        cut = data.find(sep)
        if not data.startswith(MAGIC.encode() + b"\n") or cut < 0:
            raise CheckpointError(f"{path}: not a {MAGIC} checkpoint")
        meta = {}
        for line in data[:cut].decode("ascii").splitlines()[1:]:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        try:
            actor_sizes = [int(s) for s in meta["actor_sizes"].split(",")]
            critic_sizes = [int(s) for s in meta["critic_sizes"].split(",")]
            log_std = [float(s) for s in meta["log_std"].split(",")]
            n_params = int(meta["n_params"])
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"{path}: bad header ({e})") from None
        if actor_sizes[0] != OBS_DIM or actor_sizes[-1] != ACT_DIM or critic_sizes[-1] != 1:
            raise CheckpointError(f"{path}: layer sizes {actor_sizes}/{critic_sizes} do not fit obs/action dims")
        blob = np.frombuffer(data[cut + len(sep):], dtype="<f4")
        if blob.size != n_params:
            raise CheckpointError(f"{path}: expected {n_params} parameters, found {blob.size}")

        ac = cls.__new__(cls)
        ac.actor = Mlp(actor_sizes, meta.get("actor_output", "tanh"), dtype)
        ac.critic = Mlp(critic_sizes, meta.get("critic_output", "identity"), dtype)
        params = ac.actor.params + ac.critic.params
        if sum(p.size for p in params) != n_params:
            raise CheckpointError(f"{path}: parameter count does not match layer sizes")
        i = 0
        for p in params:
            p[...] = blob[i:i + p.size].reshape(p.shape)
            i += p.size
        ac.log_std = np.array(log_std, dtype=dtype)
        if not all(math.isfinite(v) for v in log_std):
            raise CheckpointError(f"{path}: non-finite log_std")
        return ac


def _copy_mlp(net: Mlp) -> Mlp:
    out = Mlp.__new__(Mlp)
    out.__dict__.update(net.__dict__)
    out.weights = [w.copy() for w in net.weights]
    out.biases = [b.copy() for b in net.biases]
    return out
